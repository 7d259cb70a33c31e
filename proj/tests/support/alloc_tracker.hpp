#pragma once

// Process-wide heap accounting through replaced operator new/delete.
// Linked into the acceptance binary only; byte sizes come from
// malloc_usable_size, so they include allocator rounding.
namespace alloctrack {

struct Stats {
    long long live_bytes = 0;      // currently outstanding
    long long baseline_bytes = 0;  // live at the last reset
    long long peak_bytes = 0;      // max live since the last reset
    long long max_single_bytes = 0;
    long long alloc_count = 0;

    [[nodiscard]] long long peak_above_baseline() const {
        return peak_bytes - baseline_bytes;
    }
};

void reset();
Stats stats();

}  // namespace alloctrack
