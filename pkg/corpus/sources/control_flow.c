/* Control-flow cases: branching, loops, deep nesting. */
#include <stdio.h>

/* CF-L1-01 */
int simple_branch(int flag, int amount) {
    if (flag > 0) {
        return amount * 2;
    }
    return amount - 1;
}

/* CF-L2-01 */
int loop_accumulate(int n) {
    int total = 0;
    for (int i = 1; i <= n; i++) {
        if (i % 2 == 0) {
            total += i;
        } else {
            total -= 1;
        }
    }
    return total;
}

/* CF-L3-01: index of the first input that fails the positivity test, 5 if none fail. */
int nested_if_deep(int a, int b, int c, int d, int e) {
    if (a > 0) {
        if (b > 0) {
            if (c > 0) {
                if (d > 0) {
                    if (e > 0) {
                        return 5;
                    }
                    return 4;
                }
                return 3;
            }
            return 2;
        }
        return 1;
    }
    return 0;
}

int main(void) {
    printf("[CF-L1-01] result=%d\n", simple_branch(1, 21));
    printf("[CF-L1-01] result=%d\n", simple_branch(-1, 21));
    printf("[CF-L2-01] result=%d\n", loop_accumulate(6));
    printf("[CF-L3-01] result=%d\n", nested_if_deep(5, -3, 2, 1, 4));
    printf("[CF-L3-01] result=%d\n", nested_if_deep(3, 8, -1, 2, 2));
    printf("[CF-L3-01] result=%d\n", nested_if_deep(1, 2, 3, 4, -9));
    return 0;
}
