#include "fswsim/heap_model.hpp"

#include <algorithm>
#include <cstring>
#include <stdexcept>
#include <string>

namespace fswsim
{

namespace
{

constexpr std::uint32_t kAllocatedBit = 1u;

std::uint64_t round_up8(std::uint64_t n)
{
    return (n + 7) & ~std::uint64_t{7};
}

std::uint32_t tag(std::uint32_t size, bool allocated)
{
    return size | (allocated ? kAllocatedBit : 0u);
}

thread_local HeapImage* g_current_heap = nullptr;

} // namespace

HeapImage::HeapImage(std::uint64_t limit_bytes) : limit_{std::min(limit_bytes, kMaxLimit)}
{
    // calloc of a large region maps zero pages lazily; nothing is touched until used.
    storage_.reset(std::calloc(static_cast<std::size_t>(limit_ / 8 + 2), 8));
    if (!storage_) throw std::bad_alloc();
    base_ = static_cast<std::byte*>(storage_.get()) + 4;
}

std::uint32_t HeapImage::load(std::uint64_t offset) const
{
    std::uint32_t v;
    std::memcpy(&v, base_ + offset, 4);
    return v;
}

void HeapImage::store(std::uint64_t offset, std::uint32_t v)
{
    std::memcpy(base_ + offset, &v, 4);
}

std::uint32_t HeapImage::header_word(Address addr) const
{
    return load(addr - 4);
}

std::uint32_t HeapImage::footer_word(Address addr) const
{
    return load(static_cast<std::uint64_t>(addr) + (header_word(addr) & ~7u));
}

void HeapImage::write_tags(Address addr, std::uint32_t size, bool allocated)
{
    store(addr - 4, tag(size, allocated));
    store(static_cast<std::uint64_t>(addr) + size, tag(size, allocated));
}

std::span<std::byte> HeapImage::payload(Address addr)
{
    require_allocated(addr, "payload");
    return {base_ + addr, payload_size(addr)};
}

bool HeapImage::owns(const void* p) const
{
    const auto* b = static_cast<const std::byte*>(p);
    return b >= base_ && b < base_ + extent_;
}

HeapImage::Address HeapImage::address_of(const void* p) const
{
    if (!owns(p)) throw Fault(FaultKind::invalid_free, "pointer does not belong to this heap");
    return static_cast<Address>(static_cast<const std::byte*>(p) - base_);
}

bool HeapImage::is_start(Address addr) const
{
    if (addr < 4 || addr >= extent_ || (addr - 4) % 8 != 0) return false;
    const std::uint64_t slot = (addr - 4) / 8;
    return slot / 64 < starts_.size() && ((starts_[slot / 64] >> (slot % 64)) & 1u);
}

void HeapImage::mark_start(Address addr, bool on)
{
    const std::uint64_t slot = (addr - 4) / 8;
    if (slot / 64 >= starts_.size()) starts_.resize(slot / 64 + 1, 0);
    if (on)
        starts_[slot / 64] |= std::uint64_t{1} << (slot % 64);
    else
        starts_[slot / 64] &= ~(std::uint64_t{1} << (slot % 64));
}

void HeapImage::require_allocated(Address addr, const char* op) const
{
    if (!is_start(addr))
        throw Fault(FaultKind::invalid_free,
                    std::string(op) + " of address " + std::to_string(addr) + " that is not an allocated block");
}

void HeapImage::list_remove(Address addr)
{
    const Address next = next_link(addr);
    const Address prev = prev_link(addr);
    if (prev == kNil)
        head_ = next;
    else
        set_next(prev, next);
    if (next != kNil) set_prev(next, prev);
    --free_blocks_;
    free_payload_ -= payload_size(addr);
}

void HeapImage::list_push_front(Address addr)
{
    set_next(addr, head_);
    set_prev(addr, kNil);
    if (head_ != kNil) set_prev(head_, addr);
    head_ = addr;
    ++free_blocks_;
    free_payload_ += payload_size(addr);
}

void HeapImage::note_peaks()
{
    peak_allocated_ = std::max(peak_allocated_, allocated_);
    peak_extent_ = std::max(peak_extent_, extent_);
    window_peak_ = std::max(window_peak_, allocated_);
}

HeapImage::Address HeapImage::allocate_block(std::size_t size)
{
    if (size == 0) throw Fault(FaultKind::zero_size, "allocation of zero bytes");
    const std::uint64_t need = std::max<std::uint64_t>(round_up8(size), kMinPayload);

    for (Address cur = head_; cur != kNil; cur = next_link(cur))
    {
        const std::uint32_t have = payload_size(cur);
        if (have < need) continue;
        list_remove(cur);
        std::uint32_t used = have;
        if (have >= need + kMinPayload + kOverhead)
        {
            used = static_cast<std::uint32_t>(need);
            const Address rest = cur + used + kOverhead;
            write_tags(rest, have - used - kOverhead, false);
            list_push_front(rest);
        }
        write_tags(cur, used, true);
        mark_start(cur, true);
        allocated_ += used;
        note_peaks();
        return cur;
    }

    const std::uint64_t new_extent = extent_ + need + kOverhead;
    if (need > kMaxLimit || new_extent > limit_)
        throw Fault(FaultKind::memory_exhaustion, "requested " + std::to_string(size) + " bytes, extent " +
                                                      std::to_string(extent_) + ", limit " + std::to_string(limit_));
    const Address addr = static_cast<Address>(extent_ + 4);
    extent_ = new_extent;
    write_tags(addr, static_cast<std::uint32_t>(need), true);
    mark_start(addr, true);
    allocated_ += need;
    note_peaks();
    return addr;
}

void HeapImage::free_block(Address addr)
{
    std::uint32_t size = payload_size(addr);
    mark_start(addr, false);
    allocated_ -= size;

    Address start = addr;
    // Successor first: its header follows this block's footer.
    const std::uint64_t next_payload = static_cast<std::uint64_t>(addr) + size + kOverhead;
    if (next_payload < extent_ + 4 && next_payload - 4 < extent_)
    {
        const std::uint32_t w = load(next_payload - 4);
        if (!(w & kAllocatedBit))
        {
            list_remove(static_cast<Address>(next_payload));
            size += (w & ~7u) + kOverhead;
        }
    }
    if (addr > 4)
    {
        const std::uint32_t w = load(addr - 8);
        if (!(w & kAllocatedBit))
        {
            const std::uint32_t prev_size = w & ~7u;
            const Address prev = addr - kOverhead - prev_size;
            list_remove(prev);
            size += prev_size + kOverhead;
            start = prev;
        }
    }
    write_tags(start, size, false);
    list_push_front(start);
}

HeapImage::Address HeapImage::allocate(std::size_t size)
{
    const Address a = allocate_block(size);
    ++alloc_count_;
    return a;
}

void HeapImage::deallocate(Address addr)
{
    require_allocated(addr, "free");
    free_block(addr);
    ++free_count_;
}

HeapImage::Address HeapImage::allocate_zeroed(std::size_t count, std::size_t size)
{
    if (size != 0 && count > SIZE_MAX / size)
        throw Fault(FaultKind::overflow, "calloc(" + std::to_string(count) + ", " + std::to_string(size) + ") overflows");
    const std::size_t total = count * size;
    const Address a = allocate_block(total == 0 ? kMinPayload : total);
    std::memset(base_ + a, 0, payload_size(a));
    ++alloc_count_;
    return a;
}

HeapImage::Address HeapImage::reallocate(Address addr, std::size_t new_size)
{
    require_allocated(addr, "realloc");
    if (new_size == 0) throw Fault(FaultKind::zero_size, "realloc to zero bytes");
    ++realloc_count_;

    const std::uint64_t need = std::max<std::uint64_t>(round_up8(new_size), kMinPayload);
    const std::uint32_t old = payload_size(addr);
    if (need == old) return addr;

    if (need < old)
    {
        if (old - need < kMinPayload + kOverhead) return addr;
        const std::uint32_t keep = static_cast<std::uint32_t>(need);
        write_tags(addr, keep, true);
        const Address rest = addr + keep + kOverhead;
        write_tags(rest, old - keep - kOverhead, true);
        mark_start(rest, true);
        allocated_ -= old - keep;
        allocated_ += old - keep - kOverhead; // free_block subtracts the remainder payload
        free_block(rest);
        note_peaks();
        return addr;
    }

    const std::uint64_t next_payload = static_cast<std::uint64_t>(addr) + old + kOverhead;
    if (next_payload - 4 < extent_)
    {
        const std::uint32_t w = load(next_payload - 4);
        const std::uint64_t combined = std::uint64_t{old} + kOverhead + (w & ~7u);
        if (!(w & kAllocatedBit) && combined >= need)
        {
            list_remove(static_cast<Address>(next_payload));
            std::uint32_t used = static_cast<std::uint32_t>(combined);
            if (combined >= need + kMinPayload + kOverhead)
            {
                used = static_cast<std::uint32_t>(need);
                const Address rest = addr + used + kOverhead;
                write_tags(rest, static_cast<std::uint32_t>(combined - used - kOverhead), false);
                list_push_front(rest);
            }
            write_tags(addr, used, true);
            allocated_ += used - old;
            note_peaks();
            return addr;
        }
    }

    const Address moved = allocate_block(new_size);
    std::memmove(base_ + moved, base_ + addr, old);
    free_block(addr);
    return moved;
}

HeapStats HeapImage::stats() const
{
    HeapStats s;
    s.allocated_bytes = allocated_;
    s.peak_allocated = peak_allocated_;
    s.extent = extent_;
    s.peak_extent = peak_extent_;
    s.alloc_count = alloc_count_;
    s.free_count = free_count_;
    s.realloc_count = realloc_count_;
    s.free_block_count = free_blocks_;
    s.total_free_payload = free_payload_;
    for (Address cur = head_; cur != kNil; cur = next_link(cur))
        s.largest_free_payload = std::max<std::uint64_t>(s.largest_free_payload, payload_size(cur));
    s.fragmentation = free_payload_ == 0 ? 0.0
                                         : 1.0 - static_cast<double>(s.largest_free_payload) /
                                                     static_cast<double>(free_payload_);
    return s;
}

std::vector<HeapImage::BlockView> HeapImage::blocks() const
{
    std::vector<BlockView> out;
    for (std::uint64_t hdr = 0; hdr < extent_;)
    {
        const std::uint32_t w = load(hdr);
        const std::uint32_t size = w & ~7u;
        out.push_back({static_cast<Address>(hdr + 4), size, (w & kAllocatedBit) != 0});
        hdr += size + kOverhead;
    }
    return out;
}

std::vector<HeapImage::Address> HeapImage::free_list() const
{
    std::vector<Address> out;
    for (Address cur = head_; cur != kNil; cur = next_link(cur)) out.push_back(cur);
    return out;
}

void HeapImage::check_invariants() const
{
    auto fail = [](const std::string& what) { throw std::logic_error("heap invariant violated: " + what); };

    std::uint64_t hdr = 0;
    std::uint64_t alloc_sum = 0;
    std::uint64_t free_sum = 0;
    std::uint64_t free_n = 0;
    bool prev_free = false;
    while (hdr < extent_)
    {
        const std::uint32_t w = load(hdr);
        const std::uint32_t size = w & ~7u;
        const Address payload = static_cast<Address>(hdr + 4);
        if (w & 6u) fail("reserved tag bits set at " + std::to_string(payload));
        if (size < kMinPayload || size % 8 != 0) fail("bad payload size at " + std::to_string(payload));
        if ((payload + 4) % 8 != 0) fail("misaligned payload at " + std::to_string(payload));
        if (hdr + size + kOverhead > extent_) fail("block overruns extent at " + std::to_string(payload));
        if (load(hdr + 4 + size) != w) fail("header/footer mismatch at " + std::to_string(payload));
        const bool allocated = (w & kAllocatedBit) != 0;
        if (allocated != is_start(payload)) fail("allocation map disagrees at " + std::to_string(payload));
        if (!allocated)
        {
            if (prev_free) fail("adjacent free blocks at " + std::to_string(payload));
            free_sum += size;
            ++free_n;
        }
        else
        {
            alloc_sum += size;
        }
        prev_free = !allocated;
        hdr += size + kOverhead;
    }
    if (hdr != extent_) fail("blocks do not tile the extent");
    if (alloc_sum != allocated_) fail("allocated byte count drifted");

    std::uint64_t listed = 0;
    std::uint64_t listed_bytes = 0;
    Address prev = kNil;
    for (Address cur = head_; cur != kNil; cur = next_link(cur))
    {
        if (cur < 4 || cur >= extent_) fail("free list link out of range");
        if (header_word(cur) & kAllocatedBit) fail("allocated block on free list");
        if (prev_link(cur) != prev) fail("free list back link broken at " + std::to_string(cur));
        listed_bytes += payload_size(cur);
        prev = cur;
        if (++listed > free_n) fail("free list longer than free block count (cycle?)");
    }
    if (listed != free_n || listed != free_blocks_) fail("free blocks missing from free list");
    if (listed_bytes != free_sum || free_sum != free_payload_) fail("free byte count drifted");
}

HeapImage* current_heap()
{
    return g_current_heap;
}

CurrentHeapScope::CurrentHeapScope(HeapImage* heap) : previous_{g_current_heap}
{
    g_current_heap = heap;
}

CurrentHeapScope::~CurrentHeapScope()
{
    g_current_heap = previous_;
}

void* fsw_malloc(std::size_t size)
{
    HeapImage* h = g_current_heap;
    if (!h) return std::malloc(size);
    return h->data(h->allocate(size));
}

void fsw_free(void* p)
{
    if (!p) return;
    HeapImage* h = g_current_heap;
    if (!h)
    {
        std::free(p);
        return;
    }
    h->deallocate(h->address_of(p));
}

void* fsw_calloc(std::size_t count, std::size_t size)
{
    HeapImage* h = g_current_heap;
    if (!h) return std::calloc(count, size);
    return h->data(h->allocate_zeroed(count, size));
}

void* fsw_realloc(void* p, std::size_t size)
{
    HeapImage* h = g_current_heap;
    if (!h) return std::realloc(p, size);
    if (!p) return h->data(h->allocate(size));
    return h->data(h->reallocate(h->address_of(p), size));
}

} // namespace fswsim
