#pragma once

namespace pstn {

#if defined(PSTN_FLOAT32) && PSTN_FLOAT32
using Scalar = float;
#else
using Scalar = double;
#endif

}  // namespace pstn
