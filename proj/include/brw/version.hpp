#pragma once

namespace brw {

inline constexpr const char* kArtifactVersion = "brw-0.1.0";

}  // namespace brw
