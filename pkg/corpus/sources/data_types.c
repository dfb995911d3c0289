/* Data-type cases: narrowing, pointer chains, composite layouts. */
#include <stdio.h>

/* DT-L1-01 */
int mix_narrowing(int wide, int scale) {
    short narrow = (short)(wide * scale);
    unsigned char low = (unsigned char)narrow;
    return narrow + low;
}

/* DT-L2-01 */
int pointer_chain(int seed) {
    int value = seed;
    int *p = &value;
    int **pp = &p;
    **pp += seed / 2;
    return *p;
}

/* DT-L3-01 */
struct packet {
    char tag;
    int length;
    unsigned short checksum;
};

int struct_fields(int length) {
    struct packet pkt;
    pkt.tag = 'P';
    pkt.length = length;
    pkt.checksum = (unsigned short)(length * 7 + pkt.tag);
    return pkt.length + pkt.checksum - pkt.tag;
}

int main(void) {
    printf("[DT-L1-01] result=%d\n", mix_narrowing(300, 120));
    printf("[DT-L2-01] result=%d\n", pointer_chain(42));
    printf("[DT-L3-01] result=%d\n", struct_fields(1000));
    return 0;
}
