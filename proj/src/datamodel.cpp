#include "hyperalign/datamodel.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>
#include <sstream>

#include <json.hpp>

#include "hyperalign/error.hpp"

namespace hyperalign {

namespace fs = std::filesystem;
using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Subjects and standardization

SubjectData::SubjectData(std::string id, Matrix x, bool standardized)
    : id_(std::move(id)), x_(std::move(x)), standardized_(standardized) {
    if (!x_.allFinite()) throw InvalidInput("subject '" + id_ + "': non-finite entries");
    if (standardized_ && !is_standardized(x_))
        throw InvalidInput("subject '" + id_ + "': columns are not standardized");
}

Matrix standardize_columns(const Matrix& x) {
    if (x.rows() < 2) throw InvalidInput("standardize: need at least 2 time points");
    if (!x.allFinite()) throw InvalidInput("standardize: non-finite entries");
    Matrix out = x.rowwise() - x.colwise().mean();
    for (Eigen::Index c = 0; c < out.cols(); ++c) {
        const double norm = out.col(c).norm();
        // Relative test: rounding residue of a constant column stays ~1e-16·|mean|.
        const double scale = x.col(c).cwiseAbs().maxCoeff();
        if (norm <= 1e-12 * std::max(scale, 1e-300) || norm == 0.0) {
            out.col(c).setZero();
        } else {
            out.col(c) /= norm;
        }
    }
    return out;
}

SubjectData standardize(const SubjectData& raw) { return standardize(raw.id(), raw.x()); }

SubjectData standardize(std::string id, const Matrix& raw) {
    return SubjectData(std::move(id), standardize_columns(raw), true);
}

bool is_standardized(const Matrix& x, double tol) noexcept {
    if (x.rows() < 2) return false;
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
        const double norm = x.col(c).norm();
        if (norm == 0.0) continue;
        if (std::abs(x.col(c).mean()) > tol || std::abs(norm - 1.0) > tol) return false;
    }
    return true;
}

// ---------------------------------------------------------------------------
// Labels and datasets

LabelVector::LabelVector(std::vector<int> y)
    : LabelVector(y, y.empty() ? 0 : *std::max_element(y.begin(), y.end()) + 1) {}

LabelVector::LabelVector(std::vector<int> y, int num_classes) : y_(std::move(y)), num_classes_(num_classes) {
    if (y_.empty()) throw InvalidInput("labels: empty label vector");
    if (num_classes_ < 1) throw InvalidInput("labels: num_classes must be positive");
    std::vector<int> seen(static_cast<std::size_t>(num_classes_), 0);
    for (int c : y_) {
        if (c < 0 || c >= num_classes_)
            throw InvalidInput("labels: class id " + std::to_string(c) + " outside [0, " +
                               std::to_string(num_classes_) + ")");
        seen[static_cast<std::size_t>(c)] = 1;
    }
    for (int c = 0; c < num_classes_; ++c)
        if (!seen[static_cast<std::size_t>(c)])
            throw InvalidInput("labels: class " + std::to_string(c) + " never appears");
}

std::vector<int> LabelVector::class_counts() const {
    std::vector<int> counts(static_cast<std::size_t>(num_classes_), 0);
    for (int c : y_) ++counts[static_cast<std::size_t>(c)];
    return counts;
}

LabeledDataset::LabeledDataset(std::vector<SubjectData> subjects, std::optional<LabelVector> labels)
    : subjects_(std::move(subjects)), labels_(std::move(labels)) {
    if (!subjects_.empty()) {
        t_ = subjects_.front().t();
        v_ = subjects_.front().v();
    }
    for (const auto& s : subjects_) {
        if (s.t() != t_ || s.v() != v_)
            throw SchemaError("dataset: subject '" + s.id() + "' is " + std::to_string(s.t()) + "x" +
                              std::to_string(s.v()) + ", expected " + std::to_string(t_) + "x" +
                              std::to_string(v_));
    }
    if (labels_ && static_cast<Eigen::Index>(labels_->size()) != t_)
        throw SchemaError("dataset: " + std::to_string(labels_->size()) + " labels for T = " + std::to_string(t_));
}

// ---------------------------------------------------------------------------
// Binary container

namespace {

void put_u64(std::ostream& os, std::uint64_t v) {
    std::array<char, 8> b{};
    for (int i = 0; i < 8; ++i) b[static_cast<std::size_t>(i)] = static_cast<char>((v >> (8 * i)) & 0xffu);
    os.write(b.data(), 8);
}

std::uint64_t get_u64(std::istream& is) {
    std::array<unsigned char, 8> b{};
    is.read(reinterpret_cast<char*>(b.data()), 8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[static_cast<std::size_t>(i)]) << (8 * i);
    return v;
}

}  // namespace

void write_matrix(const fs::path& path, const Matrix& m) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("cannot open '" + path.string() + "' for writing");
    os.write(kMatrixMagic, sizeof kMatrixMagic);
    put_u64(os, static_cast<std::uint64_t>(m.rows()));
    put_u64(os, static_cast<std::uint64_t>(m.cols()));
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c) put_u64(os, std::bit_cast<std::uint64_t>(m(r, c)));
    if (!os) throw IoError("write failed for '" + path.string() + "'");
}

Matrix read_matrix(const fs::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open '" + path.string() + "'");
    char magic[8];
    is.read(magic, 8);
    if (!is || std::memcmp(magic, kMatrixMagic, 8) != 0) throw SchemaError("'" + path.string() + "': bad magic");
    const std::uint64_t rows = get_u64(is);
    const std::uint64_t cols = get_u64(is);
    if (!is) throw SchemaError("'" + path.string() + "': truncated header");

    is.seekg(0, std::ios::end);
    const auto payload = static_cast<std::uint64_t>(is.tellg()) - 24;
    if (cols != 0 && rows > payload / 8 / cols) throw SchemaError("'" + path.string() + "': truncated payload");
    if (payload != rows * cols * 8) throw SchemaError("'" + path.string() + "': payload size mismatch");
    is.seekg(24);

    Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = std::bit_cast<double>(get_u64(is));
    if (!is) throw IoError("read failed for '" + path.string() + "'");
    return m;
}

std::vector<int> read_labels(const fs::path& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open labels file '" + path.string() + "'");
    std::vector<int> y;
    std::string line;
    while (std::getline(is, line)) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        std::istringstream ls(line);
        int v = 0;
        std::string rest;
        if (!(ls >> v) || (ls >> rest)) throw SchemaError("labels file '" + path.string() + "': bad line '" + line + "'");
        y.push_back(v);
    }
    return y;
}

void write_labels(const fs::path& path, const std::vector<int>& y) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw IoError("cannot open '" + path.string() + "' for writing");
    for (int v : y) os << v << '\n';
    if (!os) throw IoError("write failed for '" + path.string() + "'");
}

Matrix read_csv_matrix(const fs::path& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open CSV '" + path.string() + "'");
    std::vector<std::vector<double>> rows;
    std::string line;
    while (std::getline(is, line)) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        std::vector<double> row;
        std::stringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ',')) {
            try {
                std::size_t used = 0;
                row.push_back(std::stod(cell, &used));
                if (cell.find_first_not_of(" \t\r", used) != std::string::npos) throw std::invalid_argument(cell);
            } catch (const std::exception&) {
                throw SchemaError("CSV '" + path.string() + "': non-numeric cell '" + cell + "'");
            }
        }
        if (!rows.empty() && row.size() != rows.front().size())
            throw SchemaError("CSV '" + path.string() + "': ragged rows");
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw SchemaError("CSV '" + path.string() + "': no data");
    Matrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
    for (std::size_t r = 0; r < rows.size(); ++r)
        for (std::size_t c = 0; c < rows[r].size(); ++c)
            m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
    return m;
}

// ---------------------------------------------------------------------------
// Manifest

LabeledDataset load_dataset(const fs::path& manifest_path) {
    std::ifstream is(manifest_path);
    if (!is) throw IoError("cannot open manifest '" + manifest_path.string() + "'");
    json doc;
    try {
        is >> doc;
    } catch (const json::exception& e) {
        throw SchemaError("manifest '" + manifest_path.string() + "': " + e.what());
    }
    const fs::path base = manifest_path.parent_path();

    try {
        if (!doc.contains("subjects") || !doc["subjects"].is_array() || doc["subjects"].empty())
            throw SchemaError("manifest: 'subjects' must be a non-empty array");

        std::vector<SubjectData> subjects;
        for (const auto& entry : doc["subjects"]) {
            const auto id = entry.at("id").get<std::string>();
            Matrix x = read_matrix(base / entry.at("file").get<std::string>());
            const bool std_flag = is_standardized(x);
            subjects.emplace_back(id, std::move(x), std_flag);
        }

        std::optional<LabelVector> labels;
        if (doc.contains("labels_file") && !doc["labels_file"].is_null()) {
            const fs::path labels_path = base / doc["labels_file"].get<std::string>();
            if (!fs::exists(labels_path))
                throw SchemaError("manifest: labels file '" + labels_path.string() + "' does not exist");
            auto y = read_labels(labels_path);
            try {
                labels = LabelVector(std::move(y));
            } catch (const InvalidInput& e) {
                throw SchemaError(e.what());
            }
        }

        LabeledDataset ds(std::move(subjects), std::move(labels));
        if (doc.contains("t") && doc["t"].get<Eigen::Index>() != ds.t())
            throw SchemaError("manifest: t = " + doc["t"].dump() + " but matrices have T = " + std::to_string(ds.t()));
        if (doc.contains("v") && doc["v"].get<Eigen::Index>() != ds.v())
            throw SchemaError("manifest: v = " + doc["v"].dump() + " but matrices have V = " + std::to_string(ds.v()));
        return ds;
    } catch (const json::exception& e) {
        throw SchemaError("manifest '" + manifest_path.string() + "': " + e.what());
    }
}

fs::path save_dataset(const LabeledDataset& ds, const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create '" + dir.string() + "': " + ec.message());

    json doc;
    doc["subjects"] = json::array();
    for (const auto& s : ds.subjects()) {
        const std::string file = s.id() + ".bin";
        write_matrix(dir / file, s.x());
        doc["subjects"].push_back({{"id", s.id()}, {"file", file}});
    }
    if (ds.labels()) {
        write_labels(dir / "labels.txt", ds.labels()->y());
        doc["labels_file"] = "labels.txt";
    }
    doc["t"] = ds.t();
    doc["v"] = ds.v();

    const fs::path manifest = dir / "manifest.json";
    std::ofstream os(manifest, std::ios::trunc);
    if (!os) throw IoError("cannot write '" + manifest.string() + "'");
    os << doc.dump(2) << '\n';
    if (!os) throw IoError("write failed for '" + manifest.string() + "'");
    return manifest;
}

// ---------------------------------------------------------------------------
// Synthetic generator

namespace {

Matrix gaussian(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
    std::normal_distribution<double> n01(0.0, 1.0);
    Matrix m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r)
        for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = n01(rng);
    return m;
}

// QR of a Gaussian matrix with R's diagonal made positive (Haar measure).
Matrix random_orthogonal(Eigen::Index n, std::mt19937_64& rng) {
    const Matrix g = gaussian(n, n, rng);
    Eigen::HouseholderQR<Matrix> qr(g);
    Matrix q = qr.householderQ() * Matrix::Identity(n, n);
    const Matrix r = qr.matrixQR().triangularView<Eigen::Upper>();
    for (Eigen::Index i = 0; i < n; ++i)
        if (r(i, i) < 0.0) q.col(i) *= -1.0;
    return q;
}

}  // namespace

LabeledDataset generate_synthetic(const SyntheticSpec& spec) {
    if (spec.num_subjects < 1 || spec.t_per_class < 1 || spec.num_classes < 1 || spec.v < 1)
        throw InvalidInput("synthetic: counts must be positive");
    if (!(spec.noise_sigma >= 0.0) || !std::isfinite(spec.noise_sigma))
        throw InvalidInput("synthetic: noise_sigma must be a non-negative finite number");
    if (spec.t() > spec.v)
        throw InvalidInput("synthetic: T = " + std::to_string(spec.t()) + " exceeds V = " + std::to_string(spec.v));
    if (spec.t() < 2) throw InvalidInput("synthetic: need at least 2 time points");

    std::mt19937_64 rng(spec.seed);
    const Matrix latent = gaussian(spec.num_classes, spec.v, rng);

    std::vector<int> y;
    y.reserve(static_cast<std::size_t>(spec.t()));
    for (int c = 0; c < spec.num_classes; ++c)
        for (int k = 0; k < spec.t_per_class; ++k) y.push_back(c);

    Matrix pattern(spec.t(), spec.v);
    for (int t = 0; t < spec.t(); ++t) pattern.row(t) = latent.row(y[static_cast<std::size_t>(t)]);

    Matrix shared;
    if (spec.shared_mixing) shared = random_orthogonal(spec.v, rng);

    std::vector<SubjectData> subjects;
    subjects.reserve(static_cast<std::size_t>(spec.num_subjects));
    for (int i = 0; i < spec.num_subjects; ++i) {
        const Matrix q = spec.shared_mixing ? shared : random_orthogonal(spec.v, rng);
        const Matrix noise = gaussian(spec.t(), spec.v, rng);
        const Matrix raw = pattern * q + spec.noise_sigma * noise;
        char id[32];
        std::snprintf(id, sizeof id, "sub-%02d", i + 1);
        subjects.push_back(standardize(id, raw));
    }
    return LabeledDataset(std::move(subjects), LabelVector(std::move(y), spec.num_classes));
}

}  // namespace hyperalign
