#include "txembed/embeddings.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <limits>
#include <set>

#include <json.hpp>

#include "txembed/csv.hpp"
#include "txembed/error.hpp"

namespace txembed {

std::string to_string(EmbeddingMethod m) {
    switch (m) {
        case EmbeddingMethod::one_hot: return "one_hot";
        case EmbeddingMethod::smiles: return "smiles";
        case EmbeddingMethod::kegg: return "kegg";
    }
    return "?";
}

EmbeddingMethod parse_embedding_method(std::string_view token) {
    if (token == "one_hot") return EmbeddingMethod::one_hot;
    if (token == "smiles") return EmbeddingMethod::smiles;
    if (token == "kegg") return EmbeddingMethod::kegg;
    throw ConfigError("unknown embedding method '" + std::string(token) + "'");
}

Vocabulary::Vocabulary(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
    for (std::size_t i = 0; i < tokens_.size(); ++i)
        if (!index_.emplace(tokens_[i], i).second) throw Error("duplicate vocabulary token '" + tokens_[i] + "'");
}

Vocabulary Vocabulary::sorted_union(const std::map<std::string, std::vector<std::string>>& token_lists) {
    std::set<std::string> all;
    for (const auto& [_, list] : token_lists) all.insert(list.begin(), list.end());
    return Vocabulary(std::vector<std::string>(all.begin(), all.end()));
}

std::optional<std::size_t> Vocabulary::index_of(std::string_view token) const {
    auto it = index_.find(token);
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

const std::vector<double>& TreatmentEmbedding::at(const std::string& treatment) const {
    auto it = vectors.find(treatment);
    if (it == vectors.end())
        throw Error("treatment '" + treatment + "' has no " + to_string(method) + " embedding");
    return it->second;
}

std::vector<double> one_hot_embed(std::string_view treatment, const Vocabulary& vocabulary) {
    std::vector<double> v(vocabulary.size(), 0.0);
    if (auto i = vocabulary.index_of(treatment)) v[*i] = 1.0;
    return v;
}

std::uint64_t fnv1a64(std::string_view bytes) {
    std::uint64_t h = 14695981039346656037ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

std::vector<double> smiles_featurize(std::string_view smiles, std::size_t n, std::size_t dim) {
    if (smiles.empty()) throw Error("cannot featurize an empty SMILES string");
    if (n == 0 || dim == 0) throw ConfigError("n-gram length and hash dimension must be >= 1");
    std::vector<double> v(dim, 0.0);
    if (smiles.size() < n) {
        v[fnv1a64(smiles) % dim] += 1.0;
        return v;
    }
    for (std::size_t i = 0; i + n <= smiles.size(); ++i) v[fnv1a64(smiles.substr(i, n)) % dim] += 1.0;
    return v;
}

Eigen::MatrixXd kegg_bag_embed(const std::map<std::string, std::vector<std::string>>& tokens,
                               const Vocabulary& vocabulary) {
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(tokens.size()),
                                              static_cast<Eigen::Index>(vocabulary.size()));
    Eigen::Index row = 0;
    for (const auto& [_, list] : tokens) {
        for (const auto& t : list)
            if (auto j = vocabulary.index_of(t)) m(row, static_cast<Eigen::Index>(*j)) += 1.0;
        ++row;
    }
    return m;
}

Eigen::MatrixXd tfidf_transform(const Eigen::MatrixXd& counts) {
    const double n = static_cast<double>(counts.rows());
    Eigen::MatrixXd w = counts;
    for (Eigen::Index j = 0; j < counts.cols(); ++j) {
        const double df = static_cast<double>((counts.col(j).array() > 0.0).count());
        w.col(j) *= std::log((1.0 + n) / (1.0 + df)) + 1.0;
    }
    for (Eigen::Index i = 0; i < w.rows(); ++i) {
        const double norm = w.row(i).norm();
        if (norm > 0) w.row(i) /= norm;
    }
    return w;
}

Eigen::MatrixXd PcaModel::transform(const Eigen::MatrixXd& x) const {
    return (x.rowwise() - mean.transpose()) * basis;
}

Eigen::MatrixXd PcaModel::inverse_transform(const Eigen::MatrixXd& scores) const {
    return (scores * basis.transpose()).rowwise() + mean.transpose();
}

PcaResult pca_fit_transform(const Eigen::MatrixXd& x, std::size_t k) {
    const auto n = static_cast<std::size_t>(x.rows()), d = static_cast<std::size_t>(x.cols());
    if (n < 2) throw Error("PCA needs at least 2 rows");
    if (k < 1 || k > std::min(n - 1, d))
        throw Error("PCA dimension " + std::to_string(k) + " out of range [1, " + std::to_string(std::min(n - 1, d)) +
                    "]");
    PcaResult r;
    r.model.mean = x.colwise().mean().transpose();
    const Eigen::MatrixXd centred = x.rowwise() - r.model.mean.transpose();
    // Right singular vectors of the centred data are the covariance eigenvectors.
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(centred, Eigen::ComputeThinV);
    const auto ki = static_cast<Eigen::Index>(k);
    r.model.basis = svd.matrixV().leftCols(ki);
    r.model.eigenvalues = svd.singularValues().head(ki).array().square() / static_cast<double>(n - 1);
    r.model.total_variance = centred.squaredNorm() / static_cast<double>(n - 1);
    for (Eigen::Index c = 0; c < ki; ++c) {
        Eigen::Index arg = 0;
        r.model.basis.col(c).cwiseAbs().maxCoeff(&arg);
        if (r.model.basis(arg, c) < 0) r.model.basis.col(c) *= -1.0;
    }
    r.scores = centred * r.model.basis;
    return r;
}

std::string pca_model_to_json(const PcaModel& m) {
    nlohmann::json j;
    j["mean"] = std::vector<double>(m.mean.data(), m.mean.data() + m.mean.size());
    j["eigenvalues"] = std::vector<double>(m.eigenvalues.data(), m.eigenvalues.data() + m.eigenvalues.size());
    j["total_variance"] = m.total_variance;
    auto& basis = j["basis"] = nlohmann::json::array();  // one array per component
    for (Eigen::Index c = 0; c < m.basis.cols(); ++c) {
        Eigen::VectorXd col = m.basis.col(c);
        basis.push_back(std::vector<double>(col.data(), col.data() + col.size()));
    }
    return j.dump(2);
}

PcaModel pca_model_from_json(std::string_view text) {
    auto j = nlohmann::json::parse(text);
    PcaModel m;
    auto mean = j.at("mean").get<std::vector<double>>();
    auto eig = j.at("eigenvalues").get<std::vector<double>>();
    m.mean = Eigen::Map<Eigen::VectorXd>(mean.data(), static_cast<Eigen::Index>(mean.size()));
    m.eigenvalues = Eigen::Map<Eigen::VectorXd>(eig.data(), static_cast<Eigen::Index>(eig.size()));
    m.total_variance = j.value("total_variance", 0.0);
    const auto& basis = j.at("basis");
    m.basis.resize(m.mean.size(), static_cast<Eigen::Index>(basis.size()));
    for (std::size_t c = 0; c < basis.size(); ++c) {
        auto col = basis[c].get<std::vector<double>>();
        if (col.size() != static_cast<std::size_t>(m.mean.size())) throw ParseError("PCA basis column length mismatch");
        m.basis.col(static_cast<Eigen::Index>(c)) =
            Eigen::Map<Eigen::VectorXd>(col.data(), static_cast<Eigen::Index>(col.size()));
    }
    return m;
}

double euclidean_distance(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw Error("distance between vectors of different lengths");
    double s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(s);
}

double cosine_distance(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw Error("distance between vectors of different lengths");
    double dot = 0, na = 0, nb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na == 0 || nb == 0) {
        std::clog << "warning: cosine distance with a zero vector, using 1\n";
        return 1.0;
    }
    return std::clamp(1.0 - dot / std::sqrt(na * nb), 0.0, 2.0);
}

NoveltyFeatures novelty_features(std::span<const double> unseen, std::span<const std::vector<double>> train_vectors,
                                 std::span<const std::vector<double>> all_vectors) {
    if (train_vectors.empty()) throw Error("novelty features need at least one training vector");
    if (all_vectors.empty()) throw Error("novelty features need the full vector set");
    NoveltyFeatures f;
    f.min_eucl = f.min_cosine = std::numeric_limits<double>::infinity();
    for (const auto& t : train_vectors) {
        f.min_eucl = std::min(f.min_eucl, euclidean_distance(unseen, t));
        f.min_cosine = std::min(f.min_cosine, cosine_distance(unseen, t));
    }
    std::vector<double> centre(unseen.size(), 0.0);
    for (const auto& v : all_vectors) {
        if (v.size() != centre.size()) throw Error("distance between vectors of different lengths");
        for (std::size_t i = 0; i < v.size(); ++i) centre[i] += v[i];
    }
    for (auto& c : centre) c /= static_cast<double>(all_vectors.size());
    f.eucl_to_mean = euclidean_distance(unseen, centre);
    f.cosine_to_mean = cosine_distance(unseen, centre);
    return f;
}

namespace {

TreatmentEmbedding from_rows(EmbeddingMethod method, const Eigen::MatrixXd& rows,
                             const std::vector<std::vector<std::string>>& names_per_row) {
    TreatmentEmbedding e;
    e.method = method;
    e.dim = static_cast<std::size_t>(rows.cols());
    for (Eigen::Index r = 0; r < rows.rows(); ++r) {
        Eigen::VectorXd v = rows.row(r).transpose();
        for (const auto& name : names_per_row[static_cast<std::size_t>(r)])
            e.vectors[name] = std::vector<double>(v.data(), v.data() + v.size());
    }
    return e;
}

}  // namespace

BuiltEmbedding build_smiles_embedding(std::span<const TreatmentCatalogEntry> catalog,
                                      const SmilesEmbeddingOptions& options) {
    std::vector<std::vector<std::string>> names;
    std::vector<std::vector<double>> raw;
    for (const auto& entry : catalog) {
        if (!entry.smiles) continue;
        raw.push_back(smiles_featurize(*entry.smiles, options.ngram, options.hash_dim));
        names.push_back({entry.generic_name});
    }
    if (raw.empty()) throw Error("no catalog entry has a SMILES string");
    Eigen::MatrixXd x(static_cast<Eigen::Index>(raw.size()), static_cast<Eigen::Index>(options.hash_dim));
    for (std::size_t r = 0; r < raw.size(); ++r)
        for (std::size_t c = 0; c < options.hash_dim; ++c)
            x(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = raw[r][c];
    BuiltEmbedding out;
    if (options.pca_k == 0) {
        out.embedding = from_rows(EmbeddingMethod::smiles, x, names);
        return out;
    }
    auto pca = pca_fit_transform(x, options.pca_k);
    out.embedding = from_rows(EmbeddingMethod::smiles, pca.scores, names);
    out.pca = std::move(pca.model);
    return out;
}

BuiltEmbedding build_kegg_embedding(std::span<const TreatmentCatalogEntry> catalog,
                                    const std::map<std::string, std::vector<std::string>>& tokens, std::size_t pca_k) {
    std::map<std::string, std::vector<std::string>> used;  // code -> tokens
    std::map<std::string, std::vector<std::string>> names_by_code;
    for (const auto& entry : catalog) {
        if (!entry.kegg_code) continue;
        auto it = tokens.find(*entry.kegg_code);
        if (it == tokens.end()) continue;
        used.emplace(it->first, it->second);
        names_by_code[it->first].push_back(entry.generic_name);
    }
    if (used.empty()) throw Error("no catalog entry has KEGG tokens");
    const auto vocab = Vocabulary::sorted_union(used);
    const Eigen::MatrixXd weighted = tfidf_transform(kegg_bag_embed(used, vocab));
    std::vector<std::vector<std::string>> names;
    for (const auto& [code, _] : used) names.push_back(names_by_code[code]);
    BuiltEmbedding out;
    if (pca_k == 0) {
        out.embedding = from_rows(EmbeddingMethod::kegg, weighted, names);
        return out;
    }
    auto pca = pca_fit_transform(weighted, pca_k);
    out.embedding = from_rows(EmbeddingMethod::kegg, pca.scores, names);
    out.pca = std::move(pca.model);
    return out;
}

TreatmentEmbedding build_one_hot_embedding(std::span<const TreatmentCatalogEntry> catalog) {
    std::vector<std::string> names;
    for (const auto& e : catalog) names.push_back(e.generic_name);
    std::sort(names.begin(), names.end());
    Vocabulary vocab(names);
    TreatmentEmbedding e;
    e.method = EmbeddingMethod::one_hot;
    e.dim = vocab.size();
    for (const auto& n : names) e.vectors[n] = one_hot_embed(n, vocab);
    return e;
}

void write_embedding(std::ostream& out, const TreatmentEmbedding& e) {
    std::vector<std::string> header{"treatment", "method", "dim"};
    for (std::size_t i = 0; i < e.dim; ++i) header.push_back("v" + std::to_string(i));
    csv::write_row(out, header);
    for (const auto& [name, v] : e.vectors) {
        std::vector<std::string> f{name, to_string(e.method), std::to_string(e.dim)};
        for (double x : v) f.push_back(csv::format_double(x));
        csv::write_row(out, f);
    }
}

TreatmentEmbedding read_embedding(std::istream& in) {
    auto t = csv::read(in);
    if (t.header.size() < 3 || t.header[0] != "treatment" || t.header[1] != "method" || t.header[2] != "dim")
        throw ParseError("embedding header must start with treatment,method,dim", 1);
    TreatmentEmbedding e;
    e.dim = t.header.size() - 3;
    bool first = true;
    for (const auto& row : t.rows) {
        const auto method = parse_embedding_method(row.fields[1]);
        if (first) e.method = method;
        if (method != e.method) throw ParseError("mixed embedding methods in one file", row.line);
        if (static_cast<std::size_t>(csv::parse_long(row.fields[2], row.line)) != e.dim)
            throw ParseError("dim column disagrees with the number of vector columns", row.line);
        std::vector<double> v;
        for (std::size_t c = 3; c < row.fields.size(); ++c) v.push_back(csv::parse_double(row.fields[c], row.line));
        if (!e.vectors.emplace(row.fields[0], std::move(v)).second)
            throw ParseError("duplicate treatment '" + row.fields[0] + "'", row.line);
        first = false;
    }
    return e;
}

TreatmentEmbedding read_embedding(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open '" + path.string() + "'");
    return read_embedding(in);
}

}  // namespace txembed
