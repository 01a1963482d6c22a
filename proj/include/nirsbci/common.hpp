#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace nirsbci {

inline constexpr int kDefaultChannels = 44;
inline constexpr int kNumLabels = 3;

// Declaration order doubles as the argmax tie-break order.
enum class Label : int { yes = 0, no = 1, rest = 2 };

inline constexpr std::array<Label, kNumLabels> kAllLabels{Label::yes, Label::no, Label::rest};

std::string_view to_string(Label label);
Label parse_label(std::string_view text);
inline int index_of(Label label) { return static_cast<int>(label); }

// Error taxonomy. Every failure surfaces as one of these so callers (and the
// CLI) can distinguish bad input from numerical trouble.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DomainError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class NumericalError : public Error {
 public:
  using Error::Error;
};

class ProtocolError : public Error {
 public:
  using Error::Error;
};

// Deterministic 64-bit mixer used to derive independent sub-seeds.
std::uint64_t split_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace nirsbci
