#include <cstdio>

int main() {
  std::puts("bilevel-bench: CLI under construction");
  return 1;
}
