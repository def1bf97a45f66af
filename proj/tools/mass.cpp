// Copyright 2026 the masslab authors
// SPDX-License-Identifier: Apache-2.0

#include <cstdio>

int main() {
  std::puts("mass: cli not wired yet");
  return 0;
}
