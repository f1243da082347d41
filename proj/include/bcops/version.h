#ifndef BCOPS_VERSION_H_
#define BCOPS_VERSION_H_

namespace bcops {

inline constexpr char kVersion[] = "0.1.0";

// Bumped whenever the model.json layout changes incompatibly.
inline constexpr int kModelFormatVersion = 1;

}  // namespace bcops

#endif  // BCOPS_VERSION_H_
