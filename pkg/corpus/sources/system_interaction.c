/* System-interaction cases: formatted output, raw file-descriptor writes. */
#include <stdio.h>
#include <string.h>
#include <unistd.h>

/* SI-L1-01 */
int format_report(int code, int detail) {
    char buf[64];
    int n = snprintf(buf, sizeof buf, "code=%d detail=%d", code, detail);
    return n + (buf[0] == 'c');
}

/* SI-L2-01: bypasses stdio buffering via write(2) on fd 1. */
int direct_write(int tag) {
    char buf[32];
    int n = snprintf(buf, sizeof buf, "[SI-L2-01] raw=%d\n", tag);
    if (n <= 0) {
        return -1;
    }
    ssize_t written = write(1, buf, (size_t)n);
    return (int)written;
}

int main(void) {
    printf("[SI-L1-01] result=%d\n", format_report(7, 250));
    fflush(stdout);
    int written = direct_write(33);
    printf("[SI-L2-01] result=%d\n", written);
    return 0;
}
