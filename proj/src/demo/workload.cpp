#include "fswsim/demo/workload.hpp"

#include "fswsim/fault.hpp"

#include <algorithm>

namespace fswsim::demo
{

MatrixRepresentation matrix_representation_from_string(const std::string& s)
{
    if (s == "dense") return MatrixRepresentation::dense;
    if (s == "sparse") return MatrixRepresentation::sparse;
    throw Fault(FaultKind::config_error, "unknown matrix representation '" + s + "'");
}

const char* to_string(MatrixRepresentation r)
{
    return r == MatrixRepresentation::dense ? "dense" : "sparse";
}

WorkloadResult run_matrix_workload(HeapImage& heap, MatrixRepresentation rep, std::size_t n)
{
    WorkloadResult result;
    const HeapStats before = heap.stats();
    const std::uint64_t outer_peak = heap.window_peak();
    heap.reset_window_peak();
    const HeapAllocator<double> doubles(&heap);
    const HeapAllocator<std::int64_t> indices(&heap);

    if (rep == MatrixRepresentation::dense)
    {
        if (n != 0 && n > SIZE_MAX / n / sizeof(double)) throw Fault(FaultKind::overflow, "dense matrix size overflows");
        result.bytes_requested = static_cast<std::uint64_t>(n) * n * sizeof(double);
        result.allocations = 1;
        std::vector<double, HeapAllocator<double>> g(n * n, 0.0, doubles);
        for (std::size_t i = 0; i < n; ++i) g[i * n + i] = 1.0 + static_cast<double>(i % 7);
        for (std::size_t i = 0; i < n; ++i) result.checksum += g[i * n + i];
    }
    else
    {
        result.bytes_requested = 3 * static_cast<std::uint64_t>(n) * 8;
        result.allocations = 3;
        std::vector<std::int64_t, HeapAllocator<std::int64_t>> rows(n, 0, indices);
        std::vector<std::int64_t, HeapAllocator<std::int64_t>> cols(n, 0, indices);
        std::vector<double, HeapAllocator<double>> values(n, 0.0, doubles);
        for (std::size_t i = 0; i < n; ++i)
        {
            rows[i] = static_cast<std::int64_t>(i);
            cols[i] = static_cast<std::int64_t>(i);
            values[i] = 1.0 + static_cast<double>(i % 7);
        }
        for (std::size_t i = 0; i < n; ++i) result.checksum += values[i];
    }

    result.transient_allocated = heap.window_peak() - before.allocated_bytes;
    result.transient_extent = heap.extent() - before.extent;
    heap.merge_window_peak(outer_peak);
    return result;
}

} // namespace fswsim::demo
