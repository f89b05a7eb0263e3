#include "selfmvs/memory_probe.hpp"

#include <algorithm>
#include <utility>

namespace selfmvs::memory {
namespace {

thread_local Probe* t_probe = nullptr;
thread_local Branch t_branch = Branch::kNone;

}  // namespace

void Probe::allocate(Branch branch, BufferKind kind, std::size_t bytes) {
  auto& live = live_[static_cast<int>(branch)][static_cast<int>(kind)];
  live += bytes;
  live_total_ += bytes;
  report_.total_peak_bytes = std::max(report_.total_peak_bytes, live_total_);
  if (branch == Branch::kTeacher) {
    auto& peak = kind == BufferKind::kGradient ? report_.teacher_grad_peak_bytes
                                               : report_.teacher_forward_peak_bytes;
    peak = std::max(peak, live);
  } else if (branch == Branch::kStudent) {
    auto& peak = kind == BufferKind::kGradient ? report_.student_grad_peak_bytes
                                               : report_.student_forward_peak_bytes;
    peak = std::max(peak, live);
  }
}

void Probe::release(Branch branch, BufferKind kind, std::size_t bytes) {
  live_[static_cast<int>(branch)][static_cast<int>(kind)] -= bytes;
  live_total_ -= bytes;
}

BranchScope::BranchScope(Probe* probe, Branch branch)
    : prev_probe_(t_probe), prev_branch_(t_branch) {
  t_probe = probe;
  t_branch = branch;
}

BranchScope::~BranchScope() {
  t_probe = prev_probe_;
  t_branch = prev_branch_;
}

TrackedBytes::TrackedBytes(BufferKind kind, std::size_t bytes)
    : probe_(t_probe), branch_(t_branch), kind_(kind), bytes_(bytes) {
  if (probe_ != nullptr) probe_->allocate(branch_, kind_, bytes_);
}

TrackedBytes::TrackedBytes(const TrackedBytes& other)
    : TrackedBytes(other.kind_, other.bytes_) {}

TrackedBytes::TrackedBytes(TrackedBytes&& other) noexcept { swap(other); }

TrackedBytes& TrackedBytes::operator=(TrackedBytes other) noexcept {
  swap(other);
  return *this;
}

TrackedBytes::~TrackedBytes() {
  if (probe_ != nullptr) probe_->release(branch_, kind_, bytes_);
}

void TrackedBytes::swap(TrackedBytes& other) noexcept {
  std::swap(probe_, other.probe_);
  std::swap(branch_, other.branch_);
  std::swap(kind_, other.kind_);
  std::swap(bytes_, other.bytes_);
}

}  // namespace selfmvs::memory
