#pragma once

namespace rcov {

// Thread cap for all internal OpenMP loops. Reads the RCOV_THREADS
// environment variable once (clamped to the OpenMP maximum); defaults to the
// OpenMP maximum when unset or unparsable. Always >= 1.
int max_threads();

}  // namespace rcov
