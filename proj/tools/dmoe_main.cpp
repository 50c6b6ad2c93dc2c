// Copyright (C) 2026 The dmoe authors
// SPDX-License-Identifier: Apache-2.0

#include "dmoe/cli.hpp"

int main(int argc, char** argv) { return dmoe::run_cli(argc, argv); }
