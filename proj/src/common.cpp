#include "nirsbci/common.hpp"

namespace nirsbci {

std::string_view to_string(Label label) {
  switch (label) {
    case Label::yes:
      return "yes";
    case Label::no:
      return "no";
    case Label::rest:
      return "rest";
  }
  return "?";
}

Label parse_label(std::string_view text) {
  if (text == "yes") return Label::yes;
  if (text == "no") return Label::no;
  if (text == "rest") return Label::rest;
  throw ConfigError("unknown label '" + std::string(text) + "' (expected yes, no or rest)");
}

std::uint64_t split_seed(std::uint64_t seed, std::uint64_t stream) {
  // splitmix64 over a combined state
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace nirsbci
