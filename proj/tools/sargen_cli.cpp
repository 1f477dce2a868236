#include <cstdio>

int main() {
    std::puts("sargen: command-line interface not wired yet");
    return 1;
}
