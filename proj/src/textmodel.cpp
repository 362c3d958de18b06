#include "csd/textmodel.hpp"

#include "csd/common.hpp"

#include <cmath>
#include <sstream>

namespace csd {

Article::Article(std::string id, std::vector<std::string> sentences)
    : id_(std::move(id)), sentences_(std::move(sentences)) {
    if (sentences_.empty()) throw DomainError("article '" + id_ + "' has no sentences");
    for (std::size_t i = 0; i < sentences_.size(); ++i) {
        if (sentences_[i].empty()) {
            throw DomainError("article '" + id_ + "' sentence " + std::to_string(i + 1) + " is empty");
        }
    }
}

const std::string& Article::sentence(std::size_t index) const {
    if (index < 1 || index > sentences_.size()) {
        throw DomainError("sentence index " + std::to_string(index) + " out of range 1.." +
                          std::to_string(sentences_.size()));
    }
    return sentences_[index - 1];
}

BlockIndex::BlockIndex(std::vector<std::uint32_t> indices) : indices_(std::move(indices)) {
    for (std::size_t i = 0; i < indices_.size(); ++i) {
        if (indices_[i] < 1) throw DomainError("block indices are 1-based");
        if (i > 0 && indices_[i] <= indices_[i - 1]) {
            throw DomainError("block indices must be strictly increasing");
        }
    }
}

std::string BlockIndex::to_string() const {
    std::ostringstream out;
    out << '(';
    for (std::size_t i = 0; i < indices_.size(); ++i) {
        if (i) out << ',';
        out << indices_[i];
    }
    out << ')';
    return out.str();
}

EmbeddingMatrix::EmbeddingMatrix(std::string article_id, std::size_t dim, std::vector<double> data)
    : article_id_(std::move(article_id)), dim_(dim), data_(std::move(data)) {
    if (dim_ == 0) throw DomainError("embedding dimension must be positive");
    if (data_.size() % dim_ != 0) throw DomainError("embedding payload is not a multiple of dim");
}

EmbeddingMatrix EmbeddingMatrix::select_rows(std::span<const std::size_t> rows, std::string new_id) const {
    std::vector<double> out;
    out.reserve(rows.size() * dim_);
    for (std::size_t r : rows) {
        if (r >= this->rows()) throw DomainError("embedding row out of range");
        auto src = row(r);
        out.insert(out.end(), src.begin(), src.end());
    }
    return EmbeddingMatrix(std::move(new_id), dim_, std::move(out));
}

void check_embeddings(const Article& article, const EmbeddingMatrix& emb) {
    if (emb.rows() != article.size()) {
        throw DomainError("article '" + article.id() + "' has " + std::to_string(article.size()) +
                          " sentences but " + std::to_string(emb.rows()) + " embedding rows");
    }
}

BigInt binomial(std::int64_t n, std::int64_t k) {
    if (n < 0 || k < 0 || k > n) {
        throw DomainError("binomial(" + std::to_string(n) + ", " + std::to_string(k) + ") undefined");
    }
    k = std::min(k, n - k);
    BigInt result = 1;
    // Each partial product result*(n-k+i)/i is itself a binomial, so the
    // division is exact.
    for (std::int64_t i = 1; i <= k; ++i) {
        result *= (n - k + i);
        result /= i;
    }
    return result;
}

std::optional<std::uint64_t> binomial_capped(std::int64_t n, std::int64_t k, std::uint64_t cap) {
    BigInt value = binomial(n, k);
    if (value > cap) return std::nullopt;
    return value.convert_to<std::uint64_t>();
}

std::size_t block_size_for_fraction(double c, std::size_t n) {
    // Nudge so that e.g. 0.3*10 = 2.9999999999999996 floors to 3.
    auto k = static_cast<std::size_t>(std::floor(c * static_cast<double>(n) + 1e-9));
    return std::clamp<std::size_t>(k, 1, n);
}

BlockEnumerator::BlockEnumerator(std::size_t n, std::size_t k) : n_(n), k_(k) {
    if (k < 1 || k > n) throw DomainError("enumerate_blocks requires 1 <= k <= n");
}

std::optional<BlockIndex> BlockEnumerator::next() {
    if (done_) return std::nullopt;
    if (!started_) {
        started_ = true;
        current_.resize(k_);
        for (std::size_t i = 0; i < k_; ++i) current_[i] = static_cast<std::uint32_t>(i + 1);
        return BlockIndex(current_);
    }
    // Rightmost position that can still be incremented.
    std::size_t i = k_;
    while (i > 0) {
        --i;
        if (current_[i] < n_ - (k_ - 1 - i)) {
            ++current_[i];
            for (std::size_t j = i + 1; j < k_; ++j) current_[j] = current_[j - 1] + 1;
            return BlockIndex(current_);
        }
    }
    done_ = true;
    return std::nullopt;
}

std::vector<BlockIndex> enumerate_blocks(std::size_t n, std::size_t k) {
    BlockEnumerator en(n, k);
    std::vector<BlockIndex> out;
    while (auto b = en.next()) out.push_back(std::move(*b));
    return out;
}

std::vector<std::string> block_text(const Article& article, const BlockIndex& block) {
    std::vector<std::string> out;
    out.reserve(block.size());
    for (auto idx : block) out.push_back(article.sentence(idx));
    return out;
}

}  // namespace csd
