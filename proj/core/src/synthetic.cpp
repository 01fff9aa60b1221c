#include "batchline/synthetic.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <stdexcept>

#include "batchline/term.hpp"

namespace batchline {

namespace {

using nlohmann::json;

constexpr std::array kDrugTypes = {"cannabis", "cocaine", "miscellaneous", "amphetamine and derivatives"};

const std::vector<std::string>& chemical_forms(std::size_t drug) {
    static const std::array<std::vector<std::string>, 4> forms = {{
        {"resin", "herb", "oil"},
        {"hydrochloride", "base"},
        {"powder", "tablet", "liquid"},
        {"tablet", "powder", "crystal"},
    }};
    return forms[drug];
}

class Table {
public:
    Table(std::string file, std::string target_class, std::string id_column)
        : table_{std::move(file), {std::move(id_column)}, {}, {}} {
        table_.mapping.target_class = std::move(target_class);
        table_.mapping.id_column = table_.header.front();
    }

    Table& data(const std::string& column, const std::string& property, bool lowercase = false) {
        ColumnBinding b;
        b.property = property;
        b.lowercase = lowercase;
        return add(column, std::move(b));
    }

    Table& link(const std::string& column, const std::string& property, const std::string& target) {
        ColumnBinding b;
        b.kind = ColumnBinding::Kind::Link;
        b.property = property;
        b.target_class = target;
        return add(column, std::move(b));
    }

    RecordRow& row(std::string id) {
        table_.rows.emplace_back();
        table_.rows.back()[table_.header.front()] = std::move(id);
        return table_.rows.back();
    }

    SyntheticTable take() { return std::move(table_); }

private:
    Table& add(const std::string& column, ColumnBinding b) {
        table_.header.push_back(column);
        table_.mapping.columns.emplace(column, std::move(b));
        return *this;
    }

    SyntheticTable table_;
};

std::string code(const char* prefix, std::size_t n) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%s%06zu", prefix, n);
    return buf;
}

std::string date(std::mt19937_64& rng) {
    std::uniform_int_distribution<int> year(2015, 2023), month(1, 12), day(1, 28);
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02d-%02d", year(rng), month(rng), day(rng));
    return buf;
}

std::string csv_field(const std::string& v) {
    if (v.find_first_of(",\"\r\n") == std::string::npos) return v;
    std::string out = "\"";
    for (char c : v) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

} // namespace

SyntheticDataset generate_synthetic(const SyntheticOptions& o) {
    if (o.samples == 0) throw std::invalid_argument("at least one sample is required");
    std::mt19937_64 rng(o.seed);
    auto pick = [&](std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng); };
    std::bernoulli_distribution missing(o.missing_fraction), close(o.close_fraction);

    const std::size_t n = o.samples;
    const std::size_t n_sealed = std::max<std::size_t>(1, n * 3 / 10);
    const std::size_t n_seizures = std::max<std::size_t>(1, n * 3 / 40);
    const std::size_t n_regions = 10, n_locations = 400, n_investigations = std::max<std::size_t>(1, n * 3 / 100);
    const std::size_t n_police = 30, n_logos = 300, n_colours = 12, n_shapes = 8, n_packaging = 20;
    const std::size_t n_active = 15, n_cutting = 25;

    SyntheticDataset out;
    out.id = "synthetic-" + std::to_string(o.seed) + "-" + std::to_string(n);

    Table regions("locations.csv", "Location", "locationId");
    regions.data("name", "locationName").link("within", "isLocatedIn", "Location");
    for (std::size_t i = 0; i < n_locations; ++i) {
        auto& r = regions.row(code("LOC", i));
        r["name"] = (i < n_regions ? "region " : "city ") + std::to_string(i);
        if (i >= n_regions) r["within"] = code("LOC", pick(n_regions));
    }

    auto reference = [&](const char* file, const char* cls, const char* prefix, const char* column,
                         const char* property, std::size_t count) {
        Table t(file, cls, "id");
        t.data(column, property);
        for (std::size_t i = 0; i < count; ++i) t.row(code(prefix, i))[column] = std::string(column) + " " + std::to_string(i);
        return t.take();
    };

    Table investigations("investigations.csv", "Investigation", "id");
    investigations.data("number", "investigationNumber");
    for (std::size_t i = 0; i < n_investigations; ++i) investigations.row(code("INV", i))["number"] = code("N", i);

    Table seizures("seizures.csv", "Seizure", "id");
    seizures.data("number", "seizureNumber")
        .data("date", "seizureDate")
        .data("quantity", "seizedQuantity")
        .link("location", "isSeizedAt", "Location")
        .link("investigation", "isPartOfInvestigation", "Investigation")
        .link("police", "isSeizedBy", "PoliceService");
    std::uniform_real_distribution<double> quantity(0.5, 5000.0);
    for (std::size_t i = 0; i < n_seizures; ++i) {
        auto& r = seizures.row(code("SZ", i));
        r["number"] = code("S", i);
        r["date"] = date(rng);
        r["quantity"] = format_float(std::round(quantity(rng) * 10) / 10);
        r["location"] = code("LOC", n_regions + pick(n_locations - n_regions));
        r["investigation"] = code("INV", pick(n_investigations));
        r["police"] = code("POL", pick(n_police));
    }

    Table sealed("sealed.csv", "Sealed", "id");
    sealed.data("number", "sealedNumber").data("registered", "registrationDate").link("seizure", "isSealedFrom", "Seizure");
    for (std::size_t i = 0; i < n_sealed; ++i) {
        auto& r = sealed.row(code("SL", i));
        r["number"] = code("Q", i);
        r["registered"] = date(rng);
        r["seizure"] = code("SZ", pick(n_seizures));
    }

    Table aspects("aspects.csv", "Aspect", "id");
    aspects.data("kind", "aspectKind", true)
        .data("texture", "texture")
        .link("logo", "hasLogo", "Logo")
        .link("colour", "hasColour", "Colour")
        .link("shape", "hasShape", "Shape")
        .link("packaging", "hasPackaging", "Packaging");
    Table profiles("profiles.csv", "ChemicalProfile", "id");
    profiles.data("code", "profileCode").data("date", "profileDate").link("substance", "containsSubstance", "CuttingProduct");
    Table samples("samples.csv", "Sample", "sampleNumber");
    samples.data("drugType", "drugType", true)
        .data("chemicalForm", "chemicalForm", true)
        .data("height", "height")
        .data("width", "width")
        .data("diameter", "diameter")
        .data("thickness", "thickness")
        .data("length", "length")
        .data("weight", "weight")
        .link("sealed", "comesFrom", "Sealed")
        .link("aspect", "hasExternalAspect", "Aspect")
        .link("profile", "hasChimicalProfile", "ChemicalProfile")
        .link("activePrinciple", "hasActivePrincipal", "ActivePrinciple")
        .link("closeTo", "isCloseTo", "Sample");

    std::normal_distribution<double> noise(1.0, 0.08);
    std::vector<std::size_t> drug_of(n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t drug = pick(kDrugTypes.size());
        drug_of[i] = drug;
        const auto& forms = chemical_forms(drug);
        auto& r = samples.row(code("SMP", i));
        r["drugType"] = kDrugTypes[drug];
        r["chemicalForm"] = forms[pick(forms.size())];
        auto dim = [&](const char* column, double base, bool optional) {
            if (optional && missing(rng)) return;
            r[column] = format_float(std::round(std::max(0.1, base * noise(rng)) * 10) / 10);
        };
        const double scale = 1.0 + static_cast<double>(drug);
        dim("height", 100 * scale, false);
        dim("width", 150 * scale, false);
        dim("diameter", 10 * scale, true);
        dim("thickness", 5 * scale, true);
        dim("length", 30 * scale, true);
        dim("weight", 250 * scale, true);
        r["sealed"] = code("SL", pick(n_sealed));
        r["aspect"] = code("ASP", i);
        r["profile"] = code("PRF", i);
        r["activePrinciple"] = code("ACT", pick(n_active));

        auto& a = aspects.row(code("ASP", i));
        a["kind"] = "external";
        a["texture"] = std::array{"smooth", "rough", "grainy"}[pick(3)];
        a["logo"] = code("LOGO", pick(n_logos));
        a["colour"] = code("COL", pick(n_colours));
        a["shape"] = code("SHP", pick(n_shapes));
        a["packaging"] = code("PKG", pick(n_packaging));

        auto& p = profiles.row(code("PRF", i));
        p["code"] = code("P", i);
        p["date"] = date(rng);
        p["substance"] = code("CUT", pick(n_cutting));
    }
    SyntheticTable sample_table = samples.take();
    std::array<std::vector<std::size_t>, kDrugTypes.size()> by_drug;
    for (std::size_t i = 0; i < n; ++i) by_drug[drug_of[i]].push_back(i);
    for (std::size_t i = 0; i < n; ++i) {
        if (!close(rng)) continue;
        const auto& peers = by_drug[drug_of[i]];
        if (peers.size() < 2) continue;
        std::size_t j = i;
        while (j == i) j = peers[pick(peers.size())];
        sample_table.rows[i]["closeTo"] = code("SMP", j);
    }

    out.tables.push_back(regions.take());
    out.tables.push_back(reference("police.csv", "PoliceService", "POL", "name", "serviceName", n_police));
    out.tables.push_back(investigations.take());
    out.tables.push_back(seizures.take());
    out.tables.push_back(sealed.take());
    out.tables.push_back(reference("logos.csv", "Logo", "LOGO", "name", "logoName", n_logos));
    out.tables.push_back(reference("colours.csv", "Colour", "COL", "name", "colourName", n_colours));
    out.tables.push_back(reference("shapes.csv", "Shape", "SHP", "name", "shapeName", n_shapes));
    out.tables.push_back(reference("packaging.csv", "Packaging", "PKG", "type", "packagingType", n_packaging));
    out.tables.push_back(reference("actives.csv", "ActivePrinciple", "ACT", "name", "substanceName", n_active));
    out.tables.push_back(reference("cutting.csv", "CuttingProduct", "CUT", "name", "substanceName", n_cutting));
    out.tables.push_back(aspects.take());
    out.tables.push_back(profiles.take());
    out.tables.push_back(std::move(sample_table));
    return out;
}

LoadedDataset populate_synthetic(const SyntheticDataset& data, const Schema& schema) {
    LoadedDataset out;
    out.id = data.id;
    for (const auto& t : data.tables) out.stats += populate(out.graph, schema, t.mapping, t.rows);
    return out;
}

std::string to_csv(const SyntheticTable& table) {
    std::string out;
    for (std::size_t c = 0; c < table.header.size(); ++c) out += (c ? "," : "") + csv_field(table.header[c]);
    out += "\n";
    for (const auto& row : table.rows) {
        for (std::size_t c = 0; c < table.header.size(); ++c) {
            auto it = row.find(table.header[c]);
            out += (c ? "," : "") + (it == row.end() ? std::string() : csv_field(it->second));
        }
        out += "\n";
    }
    return out;
}

void write_synthetic(const SyntheticDataset& data, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    auto write = [&](const std::filesystem::path& path, const std::string& text) {
        std::ofstream f(path, std::ios::binary);
        if (!f) throw std::runtime_error("cannot write " + path.string());
        f << text;
        if (!f) throw std::runtime_error("write failed for " + path.string());
    };
    json sources = json::array();
    for (const auto& t : data.tables) {
        std::string mapping = t.file + ".mapping.json";
        write(dir / t.file, to_csv(t));
        write(dir / mapping, t.mapping.to_json().dump(2) + "\n");
        sources.push_back(json{{"file", t.file}, {"mapping", mapping}});
    }
    write(dir / "dataset.json", json{{"id", data.id}, {"sources", sources}}.dump(2) + "\n");
}

} // namespace batchline
