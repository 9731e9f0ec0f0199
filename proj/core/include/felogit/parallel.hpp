#ifndef FELOGIT_PARALLEL_HPP
#define FELOGIT_PARALLEL_HPP

#include <cstddef>
#include <functional>

namespace felogit {

// Number of worker threads used by parallel loops: the --threads flag or
// the FELOGIT_THREADS environment variable, otherwise hardware_concurrency.
int effective_threads();
void set_thread_cap(int n);

// Runs body(i) for i in [0, n) on up to effective_threads() workers.
// Work items must write to disjoint slots; reductions are left to the
// caller so that results do not depend on the schedule.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace felogit

#endif  // FELOGIT_PARALLEL_HPP
