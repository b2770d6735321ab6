#ifndef NOISY_STA_NOISY_STA_HPP
#define NOISY_STA_NOISY_STA_HPP

#include "noisy_sta/errors.hpp"
#include "noisy_sta/waveform.hpp"
#include "noisy_sta/circuit.hpp"
#include "noisy_sta/characterize.hpp"
#include "noisy_sta/fitters.hpp"
#include "noisy_sta/sweep.hpp"
#include "noisy_sta/io.hpp"

#endif // NOISY_STA_NOISY_STA_HPP
