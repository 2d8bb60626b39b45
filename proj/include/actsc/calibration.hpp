#pragma once

#include <span>
#include <string>

#include "actsc/exec.hpp"
#include "actsc/probe.hpp"

namespace actsc {

struct TauCalibration {
    double tau = 0.5;
    std::string dataset_name;
    std::size_t n = 0;
};

/// Mean of the given probabilities, compensated summation.
TauCalibration calibrate_tau_from_probabilities(std::span<const double> p_hard, std::string dataset_name = {});

/// Routing threshold for a dataset: the mean P(hard) over all its records.
/// Predictions may run in parallel; summation is serial and compensated.
TauCalibration calibrate_tau(const ProbeModel& model, std::span<const ActivationRecord> records,
                             std::string dataset_name = {}, Exec exec = Exec::parallel);

/// P(hard) for every record, in input order.
std::vector<double> predict_all(const ProbeModel& model, std::span<const ActivationRecord> records,
                                Exec exec = Exec::parallel);

} // namespace actsc
