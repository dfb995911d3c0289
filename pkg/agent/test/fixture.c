/* Three-function tracing fixture: a recursive summation, an emitter that
 * writes to fd 1 on the success path, and the driver. */
#include <stdio.h>
#include <unistd.h>

int compute_sum(int n) {
    if (n <= 1) {
        return n;
    }
    return n + compute_sum(n - 1);
}

int emit_result(int total) {
    char buf[32];
    int len = snprintf(buf, sizeof buf, "[FC-L1-01] sum=%d\n", total);
    if (len <= 0) {
        return -1;
    }
    return (int)write(1, buf, (size_t)len);
}

int main(void) {
    return emit_result(compute_sum(3)) > 0 ? 0 : 1;
}
