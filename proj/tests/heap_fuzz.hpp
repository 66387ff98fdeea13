#pragma once

// Differential driver: random malloc/calloc/realloc/free sequences applied to
// HeapImage and ReferenceHeap side by side.

#include "fswsim/heap_model.hpp"
#include "reference_heap.hpp"

#include <optional>
#include <random>
#include <string>
#include <vector>

namespace oracle
{

struct FuzzOutcome
{
    std::uint64_t ops{0};
    std::uint64_t faults{0};
    std::uint64_t invariant_checks{0};
    std::optional<std::string> mismatch;
};

inline std::optional<std::string> compare_state(const fswsim::HeapImage& h, const ReferenceHeap& r)
{
    const auto blocks = h.blocks();
    if (blocks.size() != r.blocks().size()) return "block count";
    auto it = r.blocks().begin();
    for (const auto& b : blocks)
    {
        if (b.payload != it->first || b.size != it->second.size || b.allocated != it->second.allocated)
            return "block at " + std::to_string(b.payload);
        ++it;
    }
    const auto fl = h.free_list();
    if (!std::equal(fl.begin(), fl.end(), r.free_list().begin(), r.free_list().end())) return "free-list order";
    const fswsim::HeapStats s = h.stats();
    if (s.allocated_bytes != r.allocated_bytes()) return "allocated_bytes";
    if (s.extent != r.extent()) return "extent";
    if (s.free_block_count != r.free_list().size()) return "free_block_count";
    if (s.largest_free_payload != r.largest_free()) return "largest_free_payload";
    if (s.total_free_payload != r.total_free()) return "total_free_payload";
    if (s.fragmentation != r.fragmentation()) return "fragmentation";
    if (s.peak_allocated != r.peak_allocated) return "peak_allocated";
    if (s.peak_extent != r.peak_extent) return "peak_extent";
    if (s.alloc_count != r.alloc_count || s.free_count != r.free_count || s.realloc_count != r.realloc_count)
        return "operation counters";
    return std::nullopt;
}

/// check_every = 1 validates structure and oracle state after every operation.
inline FuzzOutcome heap_differential(std::uint64_t seed, std::uint64_t ops, std::uint64_t limit,
                                     std::uint64_t check_every = 1)
{
    FuzzOutcome out;
    fswsim::HeapImage h(limit);
    ReferenceHeap r(limit);
    std::mt19937_64 gen(seed);
    std::vector<std::uint64_t> live;
    auto size = [&] {
        // mostly small, occasionally large enough to hit the limit
        const auto pick = gen() % 100;
        if (pick < 70) return gen() % 64 + 1;
        if (pick < 95) return gen() % 1024 + 1;
        return gen() % (limit / 4) + 1;
    };

    for (std::uint64_t i = 0; i < ops; ++i)
    {
        const auto op = gen() % 100;
        std::optional<fswsim::FaultKind> fh, fr;
        std::uint64_t ah = 0, ar = 0;
        std::string what;
        try
        {
            if (op < 40 || live.empty())
            {
                what = "allocate";
                const auto n = (gen() % 200 == 0) ? 0 : size();
                try { ah = h.allocate(n); } catch (const fswsim::Fault& f) { fh = f.kind(); }
                try { ar = r.allocate(n); } catch (const fswsim::Fault& f) { fr = f.kind(); }
                if (!fh && !fr) live.push_back(ah);
            }
            else if (op < 48)
            {
                what = "allocate_zeroed";
                const auto c = gen() % 8, n = gen() % 64;
                try { ah = h.allocate_zeroed(c, n); } catch (const fswsim::Fault& f) { fh = f.kind(); }
                try { ar = r.allocate_zeroed(c, n); } catch (const fswsim::Fault& f) { fr = f.kind(); }
                if (!fh && !fr)
                {
                    for (std::byte b : h.payload(static_cast<fswsim::HeapImage::Address>(ah)))
                        if (b != std::byte{0}) return out.mismatch = "calloc payload not zeroed", out;
                    live.push_back(ah);
                }
            }
            else if (op < 65)
            {
                what = "reallocate";
                const std::size_t k = gen() % live.size();
                const auto n = (gen() % 200 == 0) ? 0 : size();
                const auto addr = static_cast<fswsim::HeapImage::Address>(live[k]);
                // stamp the payload to verify preservation across moves
                auto p = h.payload(addr);
                for (std::size_t b = 0; b < p.size(); ++b) p[b] = static_cast<std::byte>((live[k] + b) & 0xff);
                const std::size_t keep = std::min<std::size_t>(p.size(), n);
                const std::uint64_t stamp_base = live[k];
                try { ah = h.reallocate(addr, n); } catch (const fswsim::Fault& f) { fh = f.kind(); }
                try { ar = r.reallocate(live[k], n); } catch (const fswsim::Fault& f) { fr = f.kind(); }
                if (!fh && !fr)
                {
                    auto q = h.payload(static_cast<fswsim::HeapImage::Address>(ah));
                    for (std::size_t b = 0; b < keep; ++b)
                        if (q[b] != static_cast<std::byte>((stamp_base + b) & 0xff))
                            return out.mismatch = "realloc lost payload bytes", out;
                    live[k] = ah;
                }
            }
            else if (op < 97)
            {
                what = "deallocate";
                const std::size_t k = gen() % live.size();
                try { h.deallocate(static_cast<fswsim::HeapImage::Address>(live[k])); } catch (const fswsim::Fault& f) { fh = f.kind(); }
                try { r.deallocate(live[k]); } catch (const fswsim::Fault& f) { fr = f.kind(); }
                live[k] = live.back();
                live.pop_back();
            }
            else
            {
                what = "invalid free";
                // double free or interior pointer
                const std::uint64_t bogus = live.empty() ? 12 : live[gen() % live.size()] + 8 * (1 + gen() % 3);
                try { h.deallocate(static_cast<fswsim::HeapImage::Address>(bogus)); } catch (const fswsim::Fault& f) { fh = f.kind(); }
                try { r.deallocate(bogus); } catch (const fswsim::Fault& f) { fr = f.kind(); }
                // an offset can land on another live block, which then really is freed
                if (!fh && !fr) std::erase(live, bogus);
            }
        }
        catch (const std::exception& e)
        {
            return out.mismatch = "op " + std::to_string(i) + " " + what + " threw " + e.what(), out;
        }
        ++out.ops;
        if (fh != fr)
            return out.mismatch = "op " + std::to_string(i) + " " + what + ": fault mismatch", out;
        if (fh) ++out.faults;
        if (!fh && ah != ar)
            return out.mismatch = "op " + std::to_string(i) + " " + what + ": address " + std::to_string(ah) +
                                  " vs reference " + std::to_string(ar),
                   out;
        if (i % check_every == 0 || i + 1 == ops)
        {
            try
            {
                h.check_invariants();
            }
            catch (const std::logic_error& e)
            {
                return out.mismatch = "op " + std::to_string(i) + " " + what + ": " + e.what(), out;
            }
            if (auto m = compare_state(h, r)) return out.mismatch = "op " + std::to_string(i) + " " + what + ": " + *m, out;
            ++out.invariant_checks;
        }
    }
    return out;
}

} // namespace oracle
