// Measurement-file writer. Emits the toolkit's wire format with no
// dependencies: header block, one "experiment:" descriptor per experiment,
// a "---" separator, then a CSV body (experiment_id,clock_domain,run_index,
// value). Values print exactly (integers bare, reals with round-trip
// precision) so the analysis side loads them bit-identically.
#pragma once

#include <string>
#include <utility>
#include <vector>

namespace syncbench {

struct Sample {
    std::string experiment_id;  // may carry an arm suffix: id/ij, id/k1, ...
    std::string clock_domain;   // "cpu_ns" | "gpu_cycles"
    int run_index = 0;
    double value = 0.0;
};

struct ExperimentDescriptor {
    std::string id;
    std::string kind;  // "fusion" | "repeatdiff" | "timing"
    std::vector<std::pair<std::string, std::string>> params;
};

std::string format_value(double value);

class MeasurementWriter {
  public:
    MeasurementWriter(std::string device, std::string provenance);

    void add_experiment(ExperimentDescriptor descriptor);
    void add_sample(Sample sample);

    std::string serialize() const;
    bool write_file(const std::string& path) const;

  private:
    std::string device_;
    std::string provenance_;
    std::vector<ExperimentDescriptor> experiments_;
    std::vector<Sample> samples_;
};

}  // namespace syncbench
