#include <cstdio>
int main() { std::puts("rfdiff"); return 0; }
