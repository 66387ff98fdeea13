#pragma once

#include "fswsim/fault.hpp"

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <cstdlib>
#include <memory>
#include <span>
#include <vector>

namespace fswsim
{

struct HeapStats
{
    std::uint64_t allocated_bytes{0}; ///< payload bytes in allocated blocks
    std::uint64_t peak_allocated{0};
    std::uint64_t extent{0};          ///< bytes spanned by blocks, headers and footers included
    std::uint64_t peak_extent{0};
    std::uint64_t alloc_count{0};
    std::uint64_t free_count{0};
    std::uint64_t realloc_count{0};
    std::uint64_t free_block_count{0};
    std::uint64_t largest_free_payload{0};
    std::uint64_t total_free_payload{0};
    double fragmentation{0.0};        ///< 1 - largest / total free payload, 0 without free bytes

    bool operator==(const HeapStats&) const = default;
};

/// Simulated process heap with a 32-bit address space.
///
/// Layout: blocks tile [0, extent) contiguously. Each block is a 4-byte
/// header, a payload (multiple of 8, at least 8) and a 4-byte footer holding
/// the same word as the header: payload size with the allocated flag in bit 0.
/// Addresses are payload offsets from the heap base; the first payload sits at
/// offset 4. The backing store places the base at 4 mod 8, so host pointers to
/// payloads are 8-byte aligned.
///
/// Free blocks form an explicit doubly-linked list whose next/prev links are
/// 4-byte offsets stored in the first 8 payload bytes. Allocation is first-fit
/// from the list head; frees coalesce with both neighbours and push the merged
/// block on the front of the list.
class HeapImage
{
public:
    using Address = std::uint32_t;
    static constexpr Address kNil = 0xFFFFFFFFu;
    static constexpr std::uint32_t kOverhead = 8;     ///< header + footer
    static constexpr std::uint32_t kMinPayload = 8;
    static constexpr std::uint64_t kMaxLimit = 0x7FFFFFF0u;

    explicit HeapImage(std::uint64_t limit_bytes);

    HeapImage(const HeapImage&) = delete;
    HeapImage& operator=(const HeapImage&) = delete;

    /// Throws Fault(zero_size) or Fault(memory_exhaustion).
    Address allocate(std::size_t size);
    /// Throws Fault(invalid_free) for unknown or already-free addresses.
    void deallocate(Address addr);
    Address reallocate(Address addr, std::size_t new_size);
    /// count * size zeroed bytes; zero total yields a zeroed minimum block.
    Address allocate_zeroed(std::size_t count, std::size_t size);

    HeapStats stats() const;
    std::uint64_t limit() const { return limit_; }
    std::uint64_t extent() const { return extent_; }

    std::byte* data(Address addr) { return base_ + addr; }
    const std::byte* data(Address addr) const { return base_ + addr; }
    std::span<std::byte> payload(Address addr);
    std::uint32_t payload_size(Address addr) const { return header_word(addr) & ~7u; }
    Address address_of(const void* p) const;
    bool owns(const void* p) const;

    /// Peak allocated bytes since the last reset (transient high-water mark).
    void reset_window_peak() { window_peak_ = allocated_; }
    std::uint64_t window_peak() const { return window_peak_; }
    /// Raises the window peak to at least v (for nested measurements).
    void merge_window_peak(std::uint64_t v) { window_peak_ = std::max(window_peak_, v); }

    struct BlockView
    {
        Address payload;
        std::uint32_t size;
        bool allocated;
        bool operator==(const BlockView&) const = default;
    };
    /// Blocks in address order.
    std::vector<BlockView> blocks() const;
    /// Free-list order, head first.
    std::vector<Address> free_list() const;
    std::uint32_t header_word(Address addr) const;
    std::uint32_t footer_word(Address addr) const;

    /// Throws std::logic_error naming the first violated structural invariant.
    void check_invariants() const;

private:
    std::uint32_t load(std::uint64_t offset) const;
    void store(std::uint64_t offset, std::uint32_t v);
    void write_tags(Address addr, std::uint32_t size, bool allocated);
    Address next_link(Address addr) const { return load(addr); }
    Address prev_link(Address addr) const { return load(addr + 4); }
    void set_next(Address addr, Address v) { store(addr, v); }
    void set_prev(Address addr, Address v) { store(addr + 4, v); }
    void list_remove(Address addr);
    void list_push_front(Address addr);
    bool is_start(Address addr) const;
    void mark_start(Address addr, bool on);
    void require_allocated(Address addr, const char* op) const;

    Address allocate_block(std::size_t size);
    void free_block(Address addr);
    void note_peaks();

    struct FreeDeleter
    {
        void operator()(void* p) const { std::free(p); }
    };

    std::uint64_t limit_;
    std::unique_ptr<void, FreeDeleter> storage_;
    std::byte* base_{nullptr};
    std::uint64_t extent_{0};
    Address head_{kNil};
    std::vector<std::uint64_t> starts_; ///< bit per 8-byte slot: allocated block payload starts here

    std::uint64_t allocated_{0};
    std::uint64_t peak_allocated_{0};
    std::uint64_t peak_extent_{0};
    std::uint64_t window_peak_{0};
    std::uint64_t alloc_count_{0};
    std::uint64_t free_count_{0};
    std::uint64_t realloc_count_{0};
    std::uint64_t free_blocks_{0};
    std::uint64_t free_payload_{0};
};

/// Heap that receives flight-software allocations right now; nullptr means the
/// host (ordinary process memory). Per-thread so concurrent simulations stay
/// isolated.
HeapImage* current_heap();

/// RAII: makes `heap` current and restores the previous designation on scope
/// exit, exceptional or not.
class CurrentHeapScope
{
public:
    explicit CurrentHeapScope(HeapImage* heap);
    ~CurrentHeapScope();
    CurrentHeapScope(const CurrentHeapScope&) = delete;
    CurrentHeapScope& operator=(const CurrentHeapScope&) = delete;

private:
    HeapImage* previous_;
};

// malloc-family entry points for flight software; dispatch through current_heap().
void* fsw_malloc(std::size_t size);
void fsw_free(void* p);
void* fsw_calloc(std::size_t count, std::size_t size);
void* fsw_realloc(void* p, std::size_t size);

/// Standard allocator bound to the heap that was current at construction.
template <class T>
class HeapAllocator
{
public:
    using value_type = T;

    HeapAllocator() noexcept : heap_{current_heap()} {}
    explicit HeapAllocator(HeapImage* heap) noexcept : heap_{heap} {}
    template <class U>
    HeapAllocator(const HeapAllocator<U>& o) noexcept : heap_{o.heap()}
    {
    }

    T* allocate(std::size_t n)
    {
        static_assert(alignof(T) <= 8, "simulated heap payloads are 8-byte aligned");
        if (!heap_) return static_cast<T*>(::operator new(n * sizeof(T)));
        if (n > SIZE_MAX / sizeof(T)) throw Fault(FaultKind::overflow, "allocation size overflow");
        return reinterpret_cast<T*>(heap_->data(heap_->allocate(n * sizeof(T))));
    }
    void deallocate(T* p, std::size_t) noexcept
    {
        if (!heap_)
        {
            ::operator delete(p);
            return;
        }
        heap_->deallocate(heap_->address_of(p));
    }

    HeapImage* heap() const noexcept { return heap_; }

    template <class U>
    bool operator==(const HeapAllocator<U>& o) const noexcept
    {
        return heap_ == o.heap();
    }

private:
    HeapImage* heap_;
};

template <class T>
using fsw_vector = std::vector<T, HeapAllocator<T>>;

} // namespace fswsim
