#include <cstdio>

int main() {
    std::puts("conelab: CLI under construction");
    return 0;
}
