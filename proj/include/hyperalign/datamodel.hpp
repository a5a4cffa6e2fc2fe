#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "hyperalign/numkern.hpp"

namespace hyperalign {

/// One subject's T×V response matrix (rows = time points, columns = voxels).
class SubjectData {
public:
    SubjectData() = default;
    /// Throws InvalidInput on non-finite entries, or when `standardized` is
    /// claimed but the columns are not zero-mean and unit-norm (or all zero).
    SubjectData(std::string id, Matrix x, bool standardized);

    const std::string& id() const noexcept { return id_; }
    const Matrix& x() const noexcept { return x_; }
    bool standardized() const noexcept { return standardized_; }
    Eigen::Index t() const noexcept { return x_.rows(); }
    Eigen::Index v() const noexcept { return x_.cols(); }

private:
    std::string id_;
    Matrix x_;
    bool standardized_ = false;
};

/// Zero-mean, unit Euclidean norm columns. Constant columns become zero.
/// Throws InvalidInput for fewer than two rows or non-finite entries.
Matrix standardize_columns(const Matrix& x);
SubjectData standardize(const SubjectData& raw);
SubjectData standardize(std::string id, const Matrix& raw);

bool is_standardized(const Matrix& x, double tol = 1e-9) noexcept;

class LabelVector {
public:
    LabelVector() = default;
    /// num_classes is inferred as max(y) + 1.
    explicit LabelVector(std::vector<int> y);
    LabelVector(std::vector<int> y, int num_classes);

    const std::vector<int>& y() const noexcept { return y_; }
    int num_classes() const noexcept { return num_classes_; }
    std::size_t size() const noexcept { return y_.size(); }
    int operator[](std::size_t i) const { return y_[i]; }
    std::vector<int> class_counts() const;

private:
    std::vector<int> y_;
    int num_classes_ = 0;
};

class LabeledDataset {
public:
    LabeledDataset() = default;
    /// Throws SchemaError when subjects disagree on T or V, or the label
    /// length differs from T.
    LabeledDataset(std::vector<SubjectData> subjects, std::optional<LabelVector> labels);

    const std::vector<SubjectData>& subjects() const noexcept { return subjects_; }
    const std::optional<LabelVector>& labels() const noexcept { return labels_; }
    std::size_t size() const noexcept { return subjects_.size(); }
    Eigen::Index t() const noexcept { return t_; }
    Eigen::Index v() const noexcept { return v_; }

private:
    std::vector<SubjectData> subjects_;
    std::optional<LabelVector> labels_;
    Eigen::Index t_ = 0;
    Eigen::Index v_ = 0;
};

// Binary matrix container: "HAMATRX1", u64 rows, u64 cols, row-major f64 LE.
inline constexpr char kMatrixMagic[8] = {'H', 'A', 'M', 'A', 'T', 'R', 'X', '1'};

void write_matrix(const std::filesystem::path& path, const Matrix& m);
Matrix read_matrix(const std::filesystem::path& path);

std::vector<int> read_labels(const std::filesystem::path& path);
void write_labels(const std::filesystem::path& path, const std::vector<int>& y);

/// Plain numeric CSV, one row per time point. Blank lines are skipped.
Matrix read_csv_matrix(const std::filesystem::path& path);

/// Reads manifest.json ({subjects:[{id,file}], labels_file?, t, v}); file
/// paths are relative to the manifest's directory.
LabeledDataset load_dataset(const std::filesystem::path& manifest_path);
/// Writes <dir>/manifest.json, <dir>/<id>.bin per subject and
/// <dir>/labels.txt when labels are present. Returns the manifest path.
std::filesystem::path save_dataset(const LabeledDataset& ds, const std::filesystem::path& dir);

struct SyntheticSpec {
    int num_subjects = 6;
    int t_per_class = 10;
    int num_classes = 4;
    int v = 60;
    double noise_sigma = 0.0;
    std::uint64_t seed = 0;
    /// All subjects share one mixing matrix (anatomically aligned case).
    bool shared_mixing = false;

    int t() const noexcept { return t_per_class * num_classes; }
};

/// Class-blocked design: each class has one latent N(0,1) pattern over V
/// voxels; subject i's row t is latent[y_t]·Q_i + σ·noise, with Q_i a seeded
/// Haar-random orthogonal matrix. Rows are then standardized per subject.
LabeledDataset generate_synthetic(const SyntheticSpec& spec);

}  // namespace hyperalign
