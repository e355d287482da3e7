public class SumTo {
    //@ requires 0 <= n && n <= 1000;
    //@ ensures \result == n * (n + 1) / 2;
    public static int sumTo(int n) {
        int s = 0;
        int i = 0;
        //@ maintaining 0 <= i && i <= n;
        //@ maintaining s == i * (i + 1) / 2;
        //@ decreases n - i;
        while (i < n) {
            i = i + 1;
            s = s + i;
        }
        return s;
    }
}
