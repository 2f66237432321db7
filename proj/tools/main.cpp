#include <cstdio>

int main() {
    std::puts("sicmem: experiments not wired up yet");
    return 1;
}
