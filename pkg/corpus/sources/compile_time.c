/* Compile-time specialization cases: macro constants, surviving branches. */
#include <stdio.h>

#define MAX_SIZE 1024
#define HEADER_BYTES 16

/* CS-L2-01: the named constants are erased by the preprocessor. */
int scaled_capacity(int requested) {
    if (requested > MAX_SIZE - HEADER_BYTES) {
        return MAX_SIZE - HEADER_BYTES;
    }
    return requested + HEADER_BYTES;
}

/* CS-L3-01: only one branch survives preprocessing. */
int feature_branch(int input) {
#ifdef FEATURE_FAST
    return input << 2;
#else
    int out = input;
    for (int i = 0; i < 2; i++) {
        out += input;
    }
    return out;
#endif
}

int main(void) {
    printf("[CS-L2-01] result=%d\n", scaled_capacity(2000));
    printf("[CS-L2-01] result=%d\n", scaled_capacity(100));
    printf("[CS-L3-01] result=%d\n", feature_branch(11));
    return 0;
}
