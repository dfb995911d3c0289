/* Special challenges: bounded iteration with data-dependent exit, opaque predicates. */
#include <stdio.h>

/* SC-L3-01 */
int collatz_steps(unsigned int n) {
    int steps = 0;
    while (n != 1 && steps < 1000) {
        if (n % 2 == 0) {
            n /= 2;
        } else {
            n = 3 * n + 1;
        }
        steps++;
    }
    return steps;
}

/* SC-L4-01: (x * (x + 1)) is always even, so the guard always holds. */
int opaque_select(unsigned int x, int a, int b) {
    if ((x * (x + 1)) % 2 == 0) {
        if (x % 3 == 0) {
            return a - b;
        }
        return a + b;
    }
    return a * b;
}

int main(void) {
    printf("[SC-L3-01] result=%d\n", collatz_steps(27));
    printf("[SC-L4-01] result=%d\n", opaque_select(9, 40, 2));
    printf("[SC-L4-01] result=%d\n", opaque_select(7, 40, 2));
    return 0;
}
