#include "aashgp/parallel.hpp"

#include <omp.h>

namespace aashgp {

int max_threads() { return omp_get_max_threads(); }

}  // namespace aashgp
