/* Function-call cases: call chains, callbacks. */
#include <stdio.h>

static int add_tax(int price) {
    return price + price / 5;
}

static int apply_discount(int price) {
    return price - 30;
}

/* FC-L1-01 */
int call_chain(int price) {
    return add_tax(apply_discount(price));
}

/* FC-L2-01 */
int apply_callback(int value, int (*op)(int)) {
    int first = op(value);
    return op(first) + 1;
}

int main(void) {
    printf("[FC-L1-01] result=%d\n", call_chain(230));
    printf("[FC-L2-01] result=%d\n", apply_callback(120, add_tax));
    return 0;
}
