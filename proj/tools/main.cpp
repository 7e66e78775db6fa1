// Copyright 2026 The kgprompt Authors
// SPDX-License-Identifier: Apache-2.0

#include <iostream>

#include "kgprompt/cli/run.hpp"

int main(int argc, char** argv) { return kgprompt::cli::run_cli(argc, argv, std::cout, std::cerr); }
