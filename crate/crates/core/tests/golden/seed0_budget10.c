unsigned char g0 = 23;
unsigned long g1 = 28;
int g2 = 9;
int ga[4] = { 1, 2, 3, 4 };
double gd = 1.5;

long f(int a, int b) {
    unsigned char l0 = ((char)(g2));
    char l1 = (g0 || 5);
    long l2 = (86 % ((a & 7) + 1));
    int i0 = 0, i1 = 0, i2 = 0, i3 = 0, i4 = 0, i5 = 0;
    l2 |= ((40 == l1) % ((a & 7) + 1));
    if ((-((unsigned)(g2) << 9))) {
        ga[(g1 / ((g1 & 7) + 1)) & 3] = ((g2 & g1) % (((a / ((l0 & 7) + 1)) & 7) + 1));
        l2 = ((ga[l1 & 3] >> 1) | ((b * b) == (85 ? b : l0)));
        gd = gd * 0.5 + (double)(((4 * a)) & 1023);
    }
    for (i0 = 0; i0 < 3; i0++) {
        a ^= (!(l0 - g0));
        switch ((((g1 && g1) - (ga[g1 & 3] && 20))) & 3) {
        case 2:
            g0--;
            g1 = l0;
            break;
        case 3:
            break;
        }
    }
    return (long)l0 + (long)l1 + (long)l2 + (long)gd;
}
