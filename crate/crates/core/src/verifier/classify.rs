use regex::Regex;
use serde::{Deserialize, Serialize};

use super::FailureCategory;

const DEFAULT_RULES: &str = include_str!("../../rules/default_rules.toml");

#[derive(Debug, Clone)]
pub struct ClassifierRule {
    pub pattern: Regex,
    pub category: FailureCategory,
}

/// Serialized form used in configuration files.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RuleSpec {
    pub pattern: String,
    pub category: FailureCategory,
}

#[derive(Debug, Clone)]
pub struct RuleSet {
    pub rules: Vec<ClassifierRule>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RuleFile {
    rule: Vec<RuleSpec>,
}

impl RuleSet {
    pub fn from_specs(specs: &[RuleSpec]) -> Result<Self, regex::Error> {
        let rules = specs
            .iter()
            .map(|s| {
                Ok(ClassifierRule {
                    pattern: Regex::new(&s.pattern)?,
                    category: s.category,
                })
            })
            .collect::<Result<_, regex::Error>>()?;
        Ok(RuleSet { rules })
    }

    pub fn from_toml(text: &str) -> Result<Self, String> {
        let file: RuleFile = toml::from_str(text).map_err(|e| e.to_string())?;
        Self::from_specs(&file.rule).map_err(|e| e.to_string())
    }

    pub fn default_specs() -> Vec<RuleSpec> {
        toml::from_str::<RuleFile>(DEFAULT_RULES)
            .expect("bundled rule file parses")
            .rule
    }
}

impl Default for RuleSet {
    fn default() -> Self {
        RuleSet::from_toml(DEFAULT_RULES).expect("bundled rule file is valid")
    }
}

/// First matching rule wins; `Unknown` when nothing matches.
pub fn classify_failure(message: &str, rules: &RuleSet) -> FailureCategory {
    rules
        .rules
        .iter()
        .find(|r| r.pattern.is_match(message))
        .map(|r| r.category)
        .unwrap_or(FailureCategory::Unknown)
}
