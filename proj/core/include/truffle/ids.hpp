#pragma once

#include <string>

namespace truffle {

/// 128-bit random identifier rendered as 32 lowercase hex characters.
/// Used as buffer reference keys and trace ids.
std::string make_reference_key();

}  // namespace truffle
