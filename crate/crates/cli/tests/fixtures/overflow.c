int16_t narrow(void) {
    int16_t x = 0x56671485;
    return x;
}
