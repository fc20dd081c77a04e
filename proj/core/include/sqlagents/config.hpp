#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sqlagents/backend.hpp"
#include "sqlagents/dataset.hpp"
#include "sqlagents/pipelines.hpp"
#include "sqlagents/prompts.hpp"
#include "sqlagents/sqlexec.hpp"

namespace sqlagents {

struct DatasetConfig {
    std::filesystem::path root;
    std::string split;
    FieldMap field_map = FieldMap::bird();
    std::optional<std::size_t> limit;  // first N examples only
};

struct PipelineSpec {
    std::string key;  // unique label in outputs; defaults to the pipeline id
    PipelineId id = PipelineId::baseline;
    std::string model;  // baseline, MAD agents
    std::string judge;  // MAD judge; defaults to model
    int rounds = 3;
    std::vector<std::string> planners;
    std::string coder;
    std::vector<std::string> coders;  // explicit coder list, or
    std::string coder_tier;           // a key of ExperimentConfig::coder_tiers
    std::string aggregator;

    // Short human label for tables (model, "planner + planner", tier name).
    std::string label() const;
};

struct ExecConfig {
    std::chrono::milliseconds timeout{30000};
    int rves_runs = 100;  // 0 disables the R-VES timing pass
    TrimPolicy trim = TrimPolicy::iqr;
};

enum class BackendKind { http, replay, scripted };

struct BackendConfig {
    BackendKind kind = BackendKind::replay;
    std::filesystem::path fixtures;     // replay
    std::vector<std::string> script;    // scripted
    std::string base_url;               // http; falls back to OPENAI_BASE_URL
    UnsupportedFieldPolicy unsupported_fields = UnsupportedFieldPolicy::drop;
};

struct ExperimentConfig {
    DatasetConfig dataset;
    std::vector<PipelineSpec> pipelines;
    std::map<std::string, ModelProfile> models;
    std::map<std::string, std::vector<std::string>> coder_tiers;
    std::vector<std::int64_t> seeds{42, 11, 98};
    ExecConfig exec;
    std::filesystem::path output_dir;
    int max_in_flight = 4;
    BackendConfig backend;
    PersonaSet personas;
    std::optional<std::filesystem::path> template_dir;

    // Relative paths resolve against base_dir.
    static ExperimentConfig from_json(const nlohmann::json& j,
                                      const std::filesystem::path& base_dir = {});
    static ExperimentConfig load(const std::filesystem::path& file);
    nlohmann::json to_json() const;

    // Throws ConfigError: unknown model references, empty seeds, rounds < 1, ...
    void validate() const;

    const ModelProfile& model(const std::string& id) const;
    std::vector<std::string> coders_for(const PipelineSpec& spec) const;
    // Canonical dump of to_json().
    std::string canonical_text() const;
};

std::string config_hash(std::string_view canonical_text);

std::unique_ptr<Backend> make_backend(const BackendConfig& cfg);

}  // namespace sqlagents
