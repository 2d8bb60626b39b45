#include "actsc/calibration.hpp"

#include <exception>

#include "actsc/error.hpp"
#include "actsc/numeric.hpp"

namespace actsc {

std::vector<double> predict_all(const ProbeModel& model, std::span<const ActivationRecord> records, Exec exec) {
    std::vector<double> p(records.size());
    if (exec == Exec::serial) {
        for (std::size_t i = 0; i < records.size(); ++i) p[i] = predict_p_hard(model, records[i].activations);
        return p;
    }
    const auto n = static_cast<std::ptrdiff_t>(records.size());
    std::exception_ptr first_error;
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        try {
            p[static_cast<std::size_t>(i)] = predict_p_hard(model, records[static_cast<std::size_t>(i)].activations);
        } catch (...) {
#pragma omp critical(actsc_predict_error)
            if (!first_error) first_error = std::current_exception();
        }
    }
    if (first_error) std::rethrow_exception(first_error);
    return p;
}

TauCalibration calibrate_tau_from_probabilities(std::span<const double> p_hard, std::string dataset_name) {
    if (p_hard.empty()) throw ValidationError("cannot calibrate tau on an empty dataset");
    TauCalibration cal;
    cal.tau = compensated_sum(p_hard) / static_cast<double>(p_hard.size());
    cal.dataset_name = std::move(dataset_name);
    cal.n = p_hard.size();
    return cal;
}

TauCalibration calibrate_tau(const ProbeModel& model, std::span<const ActivationRecord> records,
                             std::string dataset_name, Exec exec) {
    if (records.empty()) throw ValidationError("cannot calibrate tau on an empty dataset");
    const auto p = predict_all(model, records, exec);
    return calibrate_tau_from_probabilities(p, std::move(dataset_name));
}

} // namespace actsc
