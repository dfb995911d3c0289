/* Memory-operation cases: stack arrays, aliasing. */
#include <stdio.h>

/* MO-L2-01 */
int reverse_checksum(int n) {
    int buf[8];
    if (n > 8) {
        n = 8;
    }
    for (int i = 0; i < n; i++) {
        buf[i] = i * 3 + 1;
    }
    for (int i = 0; i < n / 2; i++) {
        int tmp = buf[i];
        buf[i] = buf[n - 1 - i];
        buf[n - 1 - i] = tmp;
    }
    int sum = 0;
    for (int i = 0; i < n; i++) {
        sum += buf[i] * (i + 1);
    }
    return sum;
}

/* MO-L3-01: two views of the same buffer alias each other. */
int alias_sum(int base) {
    int buf[4] = {base, base + 1, base + 2, base + 3};
    int *head = buf;
    int *tail = buf + 3;
    *head += *tail;
    *tail = *head - base;
    return buf[0] * 1000 + buf[3];
}

int main(void) {
    printf("[MO-L2-01] result=%d\n", reverse_checksum(6));
    printf("[MO-L3-01] result=%d\n", alias_sum(10));
    return 0;
}
