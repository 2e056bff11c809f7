#pragma once

#include <cstdint>

#include "cfa/pipeline.hpp"
#include "cfa/toyir.hpp"

namespace cfa {

// Toy signing-service analog: reads a fixed-size payload, branches on a
// validity check, hashes and "signs" via compute blocks with an indirect
// call through a dispatch slot, and returns. Generates realistic branching
// for the benchmark sweeps. Not laid out.
Program make_signing_program();

// Fig-1-shaped password check: read input, compare, fetch private or public
// data, return. One cond branch decides the path.
Program make_password_program();

// Reproducible request payloads; each request drives one BEGIN..END window.
Workload make_workload(std::uint64_t seed, std::size_t requests,
                       std::size_t payload_len = 8, std::uint64_t value_range = 8);

// Deterministic driver set covering both branch classes of the toy services.
Workload driver_inputs();

}  // namespace cfa
