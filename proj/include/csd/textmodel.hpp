#pragma once

// Articles, sub-text blocks and k-subset combinatorics.  Sentence indices
// are 1-based throughout, including serialized forms.

#include <boost/multiprecision/cpp_int.hpp>

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace csd {

using BigInt = boost::multiprecision::cpp_int;

class Article {
public:
    Article(std::string id, std::vector<std::string> sentences);

    const std::string& id() const { return id_; }
    const std::vector<std::string>& sentences() const { return sentences_; }
    std::size_t size() const { return sentences_.size(); }

    // 1-based access.
    const std::string& sentence(std::size_t index) const;

private:
    std::string id_;
    std::vector<std::string> sentences_;
};

// Strictly increasing 1-based sentence indices of a sub-text block.
class BlockIndex {
public:
    BlockIndex() = default;
    // Throws DomainError unless the indices are strictly increasing and >= 1.
    explicit BlockIndex(std::vector<std::uint32_t> indices);

    std::size_t size() const { return indices_.size(); }
    std::uint32_t operator[](std::size_t i) const { return indices_[i]; }
    const std::vector<std::uint32_t>& indices() const { return indices_; }
    auto begin() const { return indices_.begin(); }
    auto end() const { return indices_.end(); }

    // Lexicographic on the index tuple.
    friend auto operator<=>(const BlockIndex&, const BlockIndex&) = default;

    std::string to_string() const;

private:
    std::vector<std::uint32_t> indices_;
};

// One unit-norm row per sentence; row r holds sentence r+1.
class EmbeddingMatrix {
public:
    EmbeddingMatrix() = default;
    EmbeddingMatrix(std::string article_id, std::size_t dim, std::vector<double> data);

    const std::string& article_id() const { return article_id_; }
    std::size_t dim() const { return dim_; }
    std::size_t rows() const { return dim_ == 0 ? 0 : data_.size() / dim_; }
    std::span<const double> row(std::size_t r) const { return {data_.data() + r * dim_, dim_}; }
    const std::vector<double>& data() const { return data_; }

    // Gathers the given 0-based rows into a new matrix.
    EmbeddingMatrix select_rows(std::span<const std::size_t> rows, std::string new_id) const;

private:
    std::string article_id_;
    std::size_t dim_ = 0;
    std::vector<double> data_;
};

// Throws DomainError when emb does not carry one row per sentence.
void check_embeddings(const Article& article, const EmbeddingMatrix& emb);

BigInt binomial(std::int64_t n, std::int64_t k);

// C(n,k) when it does not exceed `cap`, otherwise nullopt.
std::optional<std::uint64_t> binomial_capped(std::int64_t n, std::int64_t k, std::uint64_t cap);

// Block size for a fraction c of an n-sentence article: max(1, floor(c*n)).
std::size_t block_size_for_fraction(double c, std::size_t n);

// Lexicographic enumeration of all k-subsets of {1..n}.
class BlockEnumerator {
public:
    BlockEnumerator(std::size_t n, std::size_t k);

    std::optional<BlockIndex> next();

private:
    std::size_t n_;
    std::size_t k_;
    std::vector<std::uint32_t> current_;
    bool started_ = false;
    bool done_ = false;
};

std::vector<BlockIndex> enumerate_blocks(std::size_t n, std::size_t k);

std::vector<std::string> block_text(const Article& article, const BlockIndex& block);

}  // namespace csd
