#pragma once

#include <cstdint>

#include "cfa/toyir.hpp"

namespace cfa {

// Reproducible structurally-valid program generator. Control flow is a DAG
// (forward branches, calls only to later functions), so every execution
// terminates. When the budget permits, the program contains at least one of
// each instruction kind. The returned program is not laid out.
Program random_program(std::uint64_t seed, std::size_t size_budget);

}  // namespace cfa
