#pragma once

#include <cstddef>

namespace selfmvs::memory {

enum class Branch { kNone, kTeacher, kStudent };
enum class BufferKind { kForward, kGradient };

struct ProbeReport {
  std::size_t teacher_grad_peak_bytes = 0;
  std::size_t student_grad_peak_bytes = 0;
  std::size_t teacher_forward_peak_bytes = 0;
  std::size_t student_forward_peak_bytes = 0;
  std::size_t total_peak_bytes = 0;
};

// Byte counter for the buffers allocated by warping and losses. Buffers
// report themselves to the probe that is active on the allocating thread,
// attributed to the active branch.
class Probe {
 public:
  void allocate(Branch branch, BufferKind kind, std::size_t bytes);
  void release(Branch branch, BufferKind kind, std::size_t bytes);
  ProbeReport report() const { return report_; }
  std::size_t live_bytes() const { return live_total_; }

 private:
  std::size_t live_[3][2] = {};
  std::size_t live_total_ = 0;
  ProbeReport report_;
};

// Activates `probe` and `branch` on this thread for the scope's lifetime.
class BranchScope {
 public:
  BranchScope(Probe* probe, Branch branch);
  ~BranchScope();
  BranchScope(const BranchScope&) = delete;
  BranchScope& operator=(const BranchScope&) = delete;

 private:
  Probe* prev_probe_;
  Branch prev_branch_;
};

// Accounting token held next to a tracked buffer. Copying the token counts
// as a second allocation, matching a copy of the buffer it describes.
class TrackedBytes {
 public:
  TrackedBytes() = default;
  TrackedBytes(BufferKind kind, std::size_t bytes);
  TrackedBytes(const TrackedBytes& other);
  TrackedBytes(TrackedBytes&& other) noexcept;
  TrackedBytes& operator=(TrackedBytes other) noexcept;
  ~TrackedBytes();

  std::size_t bytes() const { return bytes_; }

 private:
  void swap(TrackedBytes& other) noexcept;

  Probe* probe_ = nullptr;
  Branch branch_ = Branch::kNone;
  BufferKind kind_ = BufferKind::kForward;
  std::size_t bytes_ = 0;
};

}  // namespace selfmvs::memory
