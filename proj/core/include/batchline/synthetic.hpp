#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "batchline/ingest.hpp"

namespace batchline {

// Seeded drug-domain data shaped like a seizure database: samples with
// dimensions, aspects, chemical profiles, sealed items, seizures, locations
// and reference tables. Conforms to schema/drug-domain.json.
struct SyntheticOptions {
    std::uint64_t seed = 1;
    std::size_t samples = 20'000;
    // Share of samples given an isCloseTo link to another sample.
    double close_fraction = 0.05;
    // Share of each optional dimension left empty.
    double missing_fraction = 0.1;
};

struct SyntheticTable {
    std::string file; // e.g. "samples.csv"
    std::vector<std::string> header;
    std::vector<RecordRow> rows;
    IngestMapping mapping;
};

struct SyntheticDataset {
    std::string id;
    std::vector<SyntheticTable> tables;
};

SyntheticDataset generate_synthetic(const SyntheticOptions& options);

// Ingests every table into a fresh graph.
LoadedDataset populate_synthetic(const SyntheticDataset& data, const Schema& schema);

// Writes <file> and <file>.mapping.json per table plus dataset.json.
void write_synthetic(const SyntheticDataset& data, const std::filesystem::path& dir);

// RFC-4180 rendering of one table.
std::string to_csv(const SyntheticTable& table);

} // namespace batchline
