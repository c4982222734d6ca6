#include "sgfd/io.hpp"

#include <charconv>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "sgfd/errors.hpp"

namespace sgfd {

const char* const kVersion = "sgfd 0.1.0";

namespace {

std::vector<std::string> split_tabs(const std::string& line) {
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
        std::size_t tab = line.find('\t', start);
        if (tab == std::string::npos) {
            fields.push_back(line.substr(start));
            break;
        }
        fields.push_back(line.substr(start, tab - start));
        start = tab + 1;
    }
    return fields;
}

std::vector<std::string> split_ws(const std::string& line) {
    std::vector<std::string> fields;
    std::istringstream s(line);
    std::string tok;
    while (s >> tok) fields.push_back(tok);
    return fields;
}

std::string chomp(std::string line) {
    while (!line.empty() && (line.back() == '\n' || line.back() == '\r')) line.pop_back();
    return line;
}

double parse_double(const std::string& tok, const std::string& where) {
    try {
        std::size_t pos = 0;
        double v = std::stod(tok, &pos);
        if (pos != tok.size()) throw std::invalid_argument(tok);
        return v;
    } catch (const std::exception&) {
        throw ParseError(where + ": cannot parse number '" + tok + "'");
    }
}

long parse_long(const std::string& tok, const std::string& where) {
    long v = 0;
    auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc{} || p != tok.data() + tok.size())
        throw ParseError(where + ": cannot parse integer '" + tok + "'");
    return v;
}

std::ifstream open_input(const std::string& path, bool binary = false) {
    std::ifstream in(path, binary ? std::ios::binary : std::ios::in);
    if (!in) throw IoError("cannot open '" + path + "' for reading");
    return in;
}

std::ofstream open_output(const std::string& path, bool binary = false) {
    ensure_parent_dir(path);
    std::ofstream out(path, binary ? std::ios::binary : std::ios::out);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    return out;
}

std::string fmt_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

std::vector<InteractionRecord> read_interactions_file(const std::string& path) {
    auto in = open_input(path);
    std::vector<InteractionRecord> records;
    std::string line;
    long lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        line = chomp(line);
        if (line.empty()) continue;
        auto fields = split_tabs(line);
        if (fields.size() < 2 || fields.size() > 4 || fields[0].empty() || fields[1].empty()) {
            std::ostringstream msg;
            msg << path << ": malformed interaction record at line " << lineno;
            throw ParseError(msg.str());
        }
        InteractionRecord rec;
        rec.user = fields[0];
        rec.item = fields[1];
        if (fields.size() >= 3 && !fields[2].empty()) {
            std::ostringstream where;
            where << path << " line " << lineno;
            rec.rating = parse_double(fields[2], where.str());
        }
        if (fields.size() == 4) rec.timestamp = fields[3];
        records.push_back(std::move(rec));
    }
    return records;
}

void write_interactions_file(const std::string& path, const InteractionCorpus& corpus,
                             const std::vector<std::pair<int, int>>& pairs) {
    auto out = open_output(path);
    for (const auto& [u, i] : pairs)
        out << corpus.user_ids[std::size_t(u)] << '\t' << corpus.item_ids[std::size_t(i)] << '\n';
}

std::vector<std::pair<std::string, std::string>> read_labels_file(const std::string& path) {
    auto in = open_input(path);
    std::vector<std::pair<std::string, std::string>> out;
    std::string line;
    long lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        line = chomp(line);
        if (line.empty()) continue;
        auto fields = split_tabs(line);
        if (fields.size() != 2 || fields[0].empty() || fields[1].empty()) {
            std::ostringstream msg;
            msg << path << ": malformed label record at line " << lineno;
            throw ParseError(msg.str());
        }
        out.emplace_back(fields[0], fields[1]);
    }
    return out;
}

void write_labels_file(const std::string& path, const SemanticLabels& labels,
                       const std::vector<std::string>& item_order) {
    auto out = open_output(path);
    for (const auto& id : item_order)
        out << id << '\t' << labels.class_names[std::size_t(labels.label_of(id))] << '\n';
}

GenericFeatureMatrix read_feature_file(const std::string& path) {
    auto in = open_input(path, /*binary=*/true);
    std::string header;
    if (!std::getline(in, header)) throw ParseError(path + ": empty feature file");
    auto hf = split_ws(chomp(header));
    if (hf.size() != 5 || hf[0] != "SGFD-FEAT" || hf[1] != "1")
        throw ParseError(path + ": bad feature header (expected 'SGFD-FEAT 1 <modality> <n> <dim>')");
    GenericFeatureMatrix fm;
    fm.modality = modality_from_name(hf[2]);
    const long n = parse_long(hf[3], path + " header");
    fm.dim = int(parse_long(hf[4], path + " header"));
    if (n < 0 || fm.dim < 1) throw ParseError(path + ": invalid feature counts in header");

    // Peek the first body line: a single field marks the binary variant.
    std::string first;
    if (!std::getline(in, first)) {
        if (n == 0) return fm;
        throw ParseError(path + ": truncated feature file");
    }
    first = chomp(first);
    const bool binary = split_ws(first).size() == 1;

    if (!binary) {
        std::string line = first;
        long lineno = 2;
        long row = 0;
        while (true) {
            if (!line.empty()) {
                auto fields = split_ws(line);
                if (long(fields.size()) != fm.dim + 1) {
                    std::ostringstream msg;
                    msg << path << ": malformed feature row at line " << lineno << " (expected "
                        << fm.dim + 1 << " fields, got " << fields.size() << ")";
                    throw ParseError(msg.str());
                }
                Eigen::VectorXd v(fm.dim);
                for (int d = 0; d < fm.dim; ++d) {
                    std::ostringstream where;
                    where << path << " line " << lineno;
                    v(d) = parse_double(fields[std::size_t(d) + 1], where.str());
                }
                if (!v.allFinite())
                    throw ValidationError(path + ": non-finite feature value for item '" + fields[0] + "'");
                fm.rows[fields[0]] = std::move(v);
                ++row;
            }
            if (!std::getline(in, line)) break;
            line = chomp(line);
            ++lineno;
        }
        if (row != n) {
            std::ostringstream msg;
            msg << path << ": header promises " << n << " rows, found " << row;
            throw ParseError(msg.str());
        }
        return fm;
    }

    // Binary variant: n id lines, then n*dim little-endian f32.
    std::vector<std::string> ids;
    ids.reserve(std::size_t(n));
    ids.push_back(first);
    std::string line;
    while (long(ids.size()) < n) {
        if (!std::getline(in, line)) throw ParseError(path + ": truncated item-id table");
        ids.push_back(chomp(line));
    }
    std::vector<float> buf(std::size_t(n) * std::size_t(fm.dim));
    in.read(reinterpret_cast<char*>(buf.data()), std::streamsize(buf.size() * sizeof(float)));
    if (std::size_t(in.gcount()) != buf.size() * sizeof(float))
        throw ParseError(path + ": truncated binary feature payload");
    for (long i = 0; i < n; ++i) {
        Eigen::VectorXd v(fm.dim);
        for (int d = 0; d < fm.dim; ++d)
            v(d) = double(buf[std::size_t(i) * std::size_t(fm.dim) + std::size_t(d)]);
        if (!v.allFinite())
            throw ValidationError(path + ": non-finite feature value for item '" + ids[std::size_t(i)] + "'");
        fm.rows[ids[std::size_t(i)]] = std::move(v);
    }
    return fm;
}

void write_feature_file(const std::string& path, const GenericFeatureMatrix& features,
                        const std::vector<std::string>& item_order, bool binary) {
    auto out = open_output(path, binary);
    out << "SGFD-FEAT 1 " << modality_name(features.modality) << ' ' << item_order.size() << ' '
        << features.dim << '\n';
    if (!binary) {
        for (const auto& id : item_order) {
            auto it = features.rows.find(id);
            if (it == features.rows.end())
                throw ValidationError("write_feature_file: no row for item '" + id + "'");
            out << id;
            for (int d = 0; d < features.dim; ++d) out << ' ' << fmt_double(it->second(d));
            out << '\n';
        }
        return;
    }
    for (const auto& id : item_order) out << id << '\n';
    std::vector<float> buf;
    buf.reserve(item_order.size() * std::size_t(features.dim));
    for (const auto& id : item_order) {
        auto it = features.rows.find(id);
        if (it == features.rows.end())
            throw ValidationError("write_feature_file: no row for item '" + id + "'");
        for (int d = 0; d < features.dim; ++d) buf.push_back(float(it->second(d)));
    }
    out.write(reinterpret_cast<const char*>(buf.data()), std::streamsize(buf.size() * sizeof(float)));
}

void write_param_container(const std::string& path, const ParamStore& params, bool binary) {
    auto out = open_output(path, binary);
    out << "SGFD-PARAMS 1 " << params.entries().size() << (binary ? " binary" : " text") << '\n';
    if (!binary) {
        for (const auto& e : params.entries()) {
            out << e.name << ' ' << e.rows << ' ' << e.cols << '\n';
            for (Eigen::Index r = 0; r < e.rows; ++r)
                for (Eigen::Index c = 0; c < e.cols; ++c) {
                    if (r != 0 || c != 0) out << ' ';
                    out << fmt_double(e.value_at(r, c));
                }
            out << '\n';
        }
        return;
    }
    for (const auto& e : params.entries())
        out << e.name << ' ' << e.rows << ' ' << e.cols << '\n';
    std::vector<float> buf;
    for (const auto& e : params.entries())
        for (Eigen::Index r = 0; r < e.rows; ++r)
            for (Eigen::Index c = 0; c < e.cols; ++c) buf.push_back(float(e.value_at(r, c)));
    out.write(reinterpret_cast<const char*>(buf.data()), std::streamsize(buf.size() * sizeof(float)));
}

std::vector<NamedMatrix> read_param_container(const std::string& path) {
    auto in = open_input(path, /*binary=*/true);
    std::string header;
    if (!std::getline(in, header)) throw ParseError(path + ": empty parameter container");
    auto hf = split_ws(chomp(header));
    if (hf.size() != 4 || hf[0] != "SGFD-PARAMS" || hf[1] != "1" ||
        (hf[3] != "text" && hf[3] != "binary"))
        throw ParseError(path + ": bad parameter container header");
    const long count = parse_long(hf[2], path + " header");
    const bool binary = hf[3] == "binary";

    std::vector<NamedMatrix> out;
    out.reserve(std::size_t(count));
    std::string line;
    if (!binary) {
        for (long k = 0; k < count; ++k) {
            if (!std::getline(in, line)) throw ParseError(path + ": truncated container");
            auto desc = split_ws(chomp(line));
            if (desc.size() != 3) throw ParseError(path + ": malformed parameter descriptor");
            const long rows = parse_long(desc[1], path);
            const long cols = parse_long(desc[2], path);
            if (!std::getline(in, line)) throw ParseError(path + ": missing values for '" + desc[0] + "'");
            auto vals = split_ws(chomp(line));
            if (long(vals.size()) != rows * cols)
                throw ParseError(path + ": wrong value count for '" + desc[0] + "'");
            NamedMatrix nm;
            nm.name = desc[0];
            nm.value.resize(rows, cols);
            std::size_t idx = 0;
            for (long r = 0; r < rows; ++r)
                for (long c = 0; c < cols; ++c)
                    nm.value(r, c) = parse_double(vals[idx++], path + " '" + desc[0] + "'");
            out.push_back(std::move(nm));
        }
        return out;
    }

    std::vector<std::pair<long, long>> shapes;
    for (long k = 0; k < count; ++k) {
        if (!std::getline(in, line)) throw ParseError(path + ": truncated descriptor table");
        auto desc = split_ws(chomp(line));
        if (desc.size() != 3) throw ParseError(path + ": malformed parameter descriptor");
        NamedMatrix nm;
        nm.name = desc[0];
        shapes.emplace_back(parse_long(desc[1], path), parse_long(desc[2], path));
        out.push_back(std::move(nm));
    }
    std::size_t total = 0;
    for (const auto& [r, c] : shapes) total += std::size_t(r) * std::size_t(c);
    std::vector<float> buf(total);
    in.read(reinterpret_cast<char*>(buf.data()), std::streamsize(total * sizeof(float)));
    if (std::size_t(in.gcount()) != total * sizeof(float))
        throw ParseError(path + ": truncated binary parameter payload");
    std::size_t off = 0;
    for (long k = 0; k < count; ++k) {
        auto [rows, cols] = shapes[std::size_t(k)];
        auto& nm = out[std::size_t(k)];
        nm.value.resize(rows, cols);
        for (long r = 0; r < rows; ++r)
            for (long c = 0; c < cols; ++c) nm.value(r, c) = double(buf[off++]);
    }
    return out;
}

void load_param_container(const std::string& path, ParamStore& params) {
    auto loaded = read_param_container(path);
    std::map<std::string, const NamedMatrix*> by_name;
    for (const auto& nm : loaded) by_name[nm.name] = &nm;
    for (auto& e : params.entries()) {
        auto it = by_name.find(e.name);
        if (it == by_name.end())
            throw ConfigError(path + ": checkpoint is missing parameter '" + e.name + "'");
        const auto& m = it->second->value;
        if (m.rows() != e.rows || m.cols() != e.cols) {
            std::ostringstream msg;
            msg << path << ": shape mismatch for '" << e.name << "' (checkpoint " << m.rows()
                << "x" << m.cols() << ", model " << e.rows << "x" << e.cols << ")";
            throw ConfigError(msg.str());
        }
        for (Eigen::Index r = 0; r < e.rows; ++r)
            for (Eigen::Index c = 0; c < e.cols; ++c) e.set_value_at(r, c, m(r, c));
    }
}

std::map<std::string, std::string> read_kv_config(const std::string& path) {
    auto in = open_input(path);
    std::map<std::string, std::string> kv;
    std::string line;
    long lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        line = chomp(line);
        auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        auto strip = [](std::string s) {
            std::size_t a = s.find_first_not_of(" \t");
            if (a == std::string::npos) return std::string();
            std::size_t b = s.find_last_not_of(" \t");
            return s.substr(a, b - a + 1);
        };
        line = strip(line);
        if (line.empty()) continue;
        auto eq = line.find('=');
        if (eq == std::string::npos) {
            std::ostringstream msg;
            msg << path << ": expected 'key = value' at line " << lineno;
            throw ParseError(msg.str());
        }
        std::string key = strip(line.substr(0, eq));
        std::string value = strip(line.substr(eq + 1));
        if (key.empty()) {
            std::ostringstream msg;
            msg << path << ": empty key at line " << lineno;
            throw ParseError(msg.str());
        }
        kv[key] = value;
    }
    return kv;
}

void write_kv_config(const std::string& path, const std::map<std::string, std::string>& kv) {
    auto out = open_output(path);
    for (const auto& [k, v] : kv) out << k << " = " << v << '\n';
}

void write_metrics_log(const std::string& path, const std::vector<LossReport>& log) {
    auto out = open_output(path);
    for (std::size_t step = 0; step < log.size(); ++step) {
        const auto& r = log[step];
        nlohmann::json j;
        j["step"] = step;
        j["tce"] = r.tce;
        j["fce"] = r.fce;
        j["ld"] = r.ld;
        j["fd"] = r.fd;
        j["rec"] = r.rec;
        j["total"] = r.total;
        j["lambda1"] = r.weights.lambda1;
        j["lambda2"] = r.weights.lambda2;
        out << j.dump() << '\n';
    }
}

std::vector<LossReport> read_metrics_log(const std::string& path) {
    auto in = open_input(path);
    std::vector<LossReport> log;
    std::string line;
    long lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            std::ostringstream msg;
            msg << path << ": bad metrics record at line " << lineno << ": " << e.what();
            throw ParseError(msg.str());
        }
        LossReport r;
        r.tce = j.at("tce").get<double>();
        r.fce = j.at("fce").get<double>();
        r.ld = j.at("ld").get<double>();
        r.fd = j.at("fd").get<double>();
        r.rec = j.at("rec").get<double>();
        r.total = j.at("total").get<double>();
        r.weights.lambda1 = j.at("lambda1").get<double>();
        r.weights.lambda2 = j.at("lambda2").get<double>();
        log.push_back(r);
    }
    return log;
}

void write_manifest(const std::string& path, const RunManifest& manifest) {
    nlohmann::json j;
    j["command"] = manifest.command;
    j["version"] = manifest.version;
    j["seed"] = manifest.seed;
    j["config"] = manifest.config;
    j["inputs"] = manifest.input_digests;
    j["outputs"] = manifest.outputs;
    write_text_file(path, j.dump(2) + "\n");
}

std::uint64_t fnv1a64(const std::string& bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string file_digest(const std::string& path) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx",
                  static_cast<unsigned long long>(fnv1a64(read_text_file(path))));
    return buf;
}

std::string read_text_file(const std::string& path) {
    auto in = open_input(path, /*binary=*/true);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

void write_text_file(const std::string& path, const std::string& content) {
    auto out = open_output(path, /*binary=*/true);
    out << content;
}

void ensure_parent_dir(const std::string& path) {
    std::filesystem::path p(path);
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
}

}  // namespace sgfd
