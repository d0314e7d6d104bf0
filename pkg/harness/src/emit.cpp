#include "emit.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace syncbench {

std::string format_value(double value) {
    if (std::isfinite(value) && value == std::floor(value) &&
        std::fabs(value) < 9.007199254740992e15) {
        char buffer[32];
        std::snprintf(buffer, sizeof(buffer), "%lld",
                      static_cast<long long>(value));
        return buffer;
    }
    char buffer[40];
    std::snprintf(buffer, sizeof(buffer), "%.17g", value);
    return buffer;
}

MeasurementWriter::MeasurementWriter(std::string device, std::string provenance)
    : device_(std::move(device)), provenance_(std::move(provenance)) {}

void MeasurementWriter::add_experiment(ExperimentDescriptor descriptor) {
    experiments_.push_back(std::move(descriptor));
}

void MeasurementWriter::add_sample(Sample sample) {
    samples_.push_back(std::move(sample));
}

std::string MeasurementWriter::serialize() const {
    std::ostringstream out;
    out << "schema_version: 1\n";
    out << "device: " << device_ << "\n";
    out << "provenance: " << provenance_ << "\n";
    for (const auto& experiment : experiments_) {
        out << "experiment: " << experiment.id << " type=" << experiment.kind;
        for (const auto& [key, value] : experiment.params) {
            out << " " << key << "=" << value;
        }
        out << "\n";
    }
    out << "---\n";
    out << "experiment_id,clock_domain,run_index,value\n";
    for (const auto& sample : samples_) {
        out << sample.experiment_id << "," << sample.clock_domain << ","
            << sample.run_index << "," << format_value(sample.value) << "\n";
    }
    return out.str();
}

bool MeasurementWriter::write_file(const std::string& path) const {
    std::ofstream file(path, std::ios::binary);
    if (!file) {
        return false;
    }
    file << serialize();
    return static_cast<bool>(file);
}

}  // namespace syncbench
