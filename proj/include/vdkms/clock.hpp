#pragma once

#include <cstdint>

namespace vdkms {

/// Time source in milliseconds. The simulator owns a manual clock; the CLI
/// uses the system clock. Ledger timestamps are now_ms()/1000 (unix seconds).
class Clock {
public:
    virtual ~Clock() = default;
    virtual std::int64_t now_ms() const = 0;
    std::int64_t now_s() const { return now_ms() / 1000; }
};

class SystemClock final : public Clock {
public:
    std::int64_t now_ms() const override;
};

class ManualClock final : public Clock {
public:
    explicit ManualClock(std::int64_t start_ms = 0) : now_(start_ms) {}
    std::int64_t now_ms() const override { return now_; }
    void set_ms(std::int64_t t) { now_ = t; }
    void advance_ms(std::int64_t d) { now_ += d; }

private:
    std::int64_t now_;
};

}  // namespace vdkms
