#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mfl/config.hpp"
#include "mfl/studies.hpp"

namespace mfl {

enum ExitCode : int { kExitPass = 0, kExitCriterion = 1, kExitConfig = 2, kExitAbort = 3 };

struct RunOptions {
    int jobs = 1;
    /// Progress and warnings; null for silence.
    std::ostream* log = nullptr;
};

struct RunOutcome {
    int exit_code = kExitPass;
    std::vector<Criterion> criteria;
    std::optional<std::string> abort_reason;
    std::filesystem::path manifest;
};

/// Runs one experiment into config.output_dir. Writes the resolved config
/// first and manifest.json last (atomically, also on abort).
RunOutcome run(ExperimentConfig const& config, RunOptions const& options = {});

/// Write to a temporary sibling, then rename over `path`.
void write_file_atomic(std::filesystem::path const& path, std::string_view contents);

/// 64-bit FNV-1a.
std::uint64_t fnv1a(std::string_view bytes);

}  // namespace mfl
