#ifndef NOISY_STA_ERRORS_HPP
#define NOISY_STA_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace nsta {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Query outside the span of a sampled waveform.
class RangeError : public Error {
public:
  using Error::Error;
};

/// Waveform does not cross a level the operation needs.
class NotATransition : public Error {
public:
  using Error::Error;
};

class InvalidWaveform : public Error {
public:
  using Error::Error;
};

class ConfigError : public Error {
public:
  using Error::Error;
};

class SimulationDiverged : public Error {
public:
  using Error::Error;
};

class CharacterizationError : public Error {
public:
  using Error::Error;
};

/// Fit could not be formed (all weights zero, empty area, ...).
class DegenerateFit : public Error {
public:
  using Error::Error;
};

} // namespace nsta

#endif // NOISY_STA_ERRORS_HPP
