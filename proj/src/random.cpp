#include "hbsde/random.hpp"

namespace hbsde {

static_assert(split_seed(1, 0) != split_seed(1, 1));
static_assert(split_seed(1, 0) != split_seed(2, 0));

}  // namespace hbsde
