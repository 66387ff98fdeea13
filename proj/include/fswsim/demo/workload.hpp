#pragma once

#include "fswsim/heap_model.hpp"

#include <cstddef>
#include <cstdint>
#include <string>

namespace fswsim::demo
{

enum class MatrixRepresentation
{
    dense,  ///< n*n doubles
    sparse, ///< diagonal triplets: row index, column index, value arrays of n entries
};

MatrixRepresentation matrix_representation_from_string(const std::string& s);
const char* to_string(MatrixRepresentation r);

struct WorkloadResult
{
    std::uint64_t bytes_requested{0};  ///< closed-form footprint
    std::uint64_t allocations{0};
    std::uint64_t transient_allocated{0}; ///< peak allocated bytes above the starting level
    std::uint64_t transient_extent{0};    ///< heap extent growth
    double checksum{0};
};

/// Builds a diagonal constraint matrix in `heap`, touches every stored entry,
/// and releases it. Throws Fault(memory_exhaustion) when the heap limit is hit.
WorkloadResult run_matrix_workload(HeapImage& heap, MatrixRepresentation rep, std::size_t n);

} // namespace fswsim::demo
