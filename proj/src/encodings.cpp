#include "weightsmith/encodings.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace weightsmith {

Eigen::Index encoding_width(Eigen::Index n_max, Eigen::Index min_width) {
  require(n_max >= 1, ErrorKind::InvalidInput, "n_max must be at least 1");
  Eigen::Index b = 0;
  while ((Eigen::Index{1} << b) < n_max) ++b;
  return std::max(b, min_width);
}

BinaryEncoding binary_encoding(Eigen::Index i, Eigen::Index width) {
  require(i >= 0 && width >= 1 && width < 62 && i < (Eigen::Index{1} << width), ErrorKind::InvalidInput,
          "position " + std::to_string(i) + " does not fit in " + std::to_string(width) + " bits");
  BinaryEncoding r(width);
  for (Eigen::Index k = 0; k < width; ++k) r(k) = ((i >> k) & 1) ? 1.0 : -1.0;
  return r;
}

std::vector<BinaryEncoding> make_binary_encodings(Eigen::Index n_max, Eigen::Index min_width) {
  const Eigen::Index b = encoding_width(n_max, min_width);
  std::vector<BinaryEncoding> out;
  out.reserve(static_cast<std::size_t>(n_max));
  for (Eigen::Index i = 0; i < n_max; ++i) out.push_back(binary_encoding(i, b));
  return out;
}

Matrix encoding_matrix(Eigen::Index n_max, Eigen::Index min_width) {
  const Eigen::Index b = encoding_width(n_max, min_width);
  Matrix m(b, n_max);
  for (Eigen::Index i = 0; i < n_max; ++i) m.col(i) = binary_encoding(i, b);
  return m;
}

double separation_margin(const std::vector<BinaryEncoding>& family) {
  double margin = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < family.size(); ++i) {
    const double self = family[i].squaredNorm();
    for (std::size_t j = 0; j < family.size(); ++j)
      if (i != j) margin = std::min(margin, self - family[i].dot(family[j]));
  }
  return margin;
}

Eigen::Index CotPrompt::depth() const {
  return chains.empty() ? 0 : static_cast<Eigen::Index>(chains.front().size()) - 1;
}

Eigen::Index CotPrompt::max_dim() const {
  Eigen::Index d = 0;
  for (const auto& c : chains)
    for (const auto& v : c) d = std::max(d, v.size());
  for (const auto& v : test) d = std::max(d, v.size());
  return d;
}

PromptLayout PromptLayout::make(Eigen::Index d_data, Eigen::Index n_max) {
  require(d_data >= 1, ErrorKind::InvalidInput, "data rows must be positive");
  PromptLayout p;
  p.d_data = d_data;
  p.n_max = n_max;
  // width 2 at least so that positions 1 and 2 share all but one bit
  p.enc_width = encoding_width(n_max, 2);
  return p;
}

void check_prompt(const CotPrompt& prompt, Eigen::Index ell) {
  require(prompt.samples() >= 1, ErrorKind::PromptStateError, "prompt has no demonstrations");
  const Eigen::Index L = prompt.depth();
  require(L >= 1, ErrorKind::PromptStateError, "chains need at least one step");
  require(ell >= 1 && ell <= L, ErrorKind::PromptStateError,
          "step " + std::to_string(ell) + " outside 1.." + std::to_string(L));
  for (const auto& c : prompt.chains) {
    require(static_cast<Eigen::Index>(c.size()) == L + 1, ErrorKind::PromptStateError, "chains differ in length");
    for (std::size_t p = 0; p < c.size(); ++p)
      require(c[p].size() == prompt.chains.front()[p].size(), ErrorKind::PromptStateError,
              "chains differ in feature dimension");
  }
  require(static_cast<Eigen::Index>(prompt.test.size()) == ell, ErrorKind::PromptStateError,
          "test chain holds " + std::to_string(prompt.test.size()) + " tokens, step " + std::to_string(ell) +
              " needs " + std::to_string(ell));
  for (std::size_t p = 0; p < prompt.test.size(); ++p)
    require(prompt.test[p].size() == prompt.chains.front()[p].size(), ErrorKind::PromptStateError,
            "test token dimension differs from the demonstrations");
}

Eigen::Index prompt_tokens(const CotPrompt& prompt, Eigen::Index ell) {
  return prompt.samples() * (prompt.depth() + 1) + ell;
}

PromptLayout layout_for(const CotPrompt& prompt, Eigen::Index ell) {
  check_prompt(prompt, ell);
  return PromptLayout::make(prompt.max_dim(), prompt_tokens(prompt, ell));
}

namespace {

// (token features, position in chain 0..L) in prompt order
template <typename F>
void for_each_token(const CotPrompt& prompt, F&& f) {
  Eigen::Index t = 0;
  for (const auto& c : prompt.chains)
    for (std::size_t p = 0; p < c.size(); ++p) f(t++, c[p], static_cast<Eigen::Index>(p), false);
  for (std::size_t p = 0; p < prompt.test.size(); ++p) f(t++, prompt.test[p], static_cast<Eigen::Index>(p), true);
}

}  // namespace

Matrix assemble_cot_input(const CotPrompt& prompt, Eigen::Index ell, const PromptLayout& layout) {
  check_prompt(prompt, ell);
  const Eigen::Index N = prompt_tokens(prompt, ell);
  require(prompt.max_dim() <= layout.d_data, ErrorKind::ShapeError, "features wider than the data band");
  require(N <= layout.n_max, ErrorKind::CapacityError,
          std::to_string(N) + " tokens exceed encoding capacity " + std::to_string(layout.n_max));
  Matrix x = Matrix::Zero(layout.rows(), N);
  for_each_token(prompt, [&](Eigen::Index t, const Vector& v, Eigen::Index p, bool test) {
    x.block(layout.band1(), t, v.size(), 1) = v;
    x(layout.cycle1(), t) = static_cast<double>(p + 1);
    x(layout.cycle2(), t) = static_cast<double>(p + 1);
    x(layout.enumeration(), t) = static_cast<double>(t + 1);
    x(layout.ln(), t) = std::log(static_cast<double>(t + 1));
    x(layout.indicator(), t) = test ? 1.0 : 0.0;
    x(layout.ones(), t) = 1.0;
    const BinaryEncoding r = binary_encoding(t, layout.enc_width);
    x.block(layout.own(), t, layout.enc_width, 1) = r;
    x.block(layout.dest(), t, layout.enc_width, 1) = r;
  });
  validate(x, "prompt matrix");
  return x;
}

Matrix assemble_cot_input(const CotPrompt& prompt, Eigen::Index ell) {
  return assemble_cot_input(prompt, ell, layout_for(prompt, ell));
}

Matrix ideal_filtered(const CotPrompt& prompt, Eigen::Index ell, Eigen::Index d_data) {
  check_prompt(prompt, ell);
  require(prompt.max_dim() <= d_data, ErrorKind::ShapeError, "features wider than the data band");
  Matrix out = Matrix::Zero(2 * d_data, prompt_tokens(prompt, ell));
  for_each_token(prompt, [&](Eigen::Index t, const Vector& v, Eigen::Index p, bool) {
    // position p holds s^p; band 1 keeps s^{ell-1}, band 2 keeps s^ell
    if (p == ell - 1) out.block(0, t, v.size(), 1) = v;
    if (p == ell) out.block(d_data, t, v.size(), 1) = v;
  });
  return out;
}

Matrix ideal_filtered(const CotPrompt& prompt, Eigen::Index ell) {
  return ideal_filtered(prompt, ell, prompt.max_dim());
}

Matrix project_bands(const Matrix& out, const PromptLayout& layout) {
  require(out.rows() == layout.rows(), ErrorKind::LayoutError, "output does not match the prompt layout");
  return out.topRows(2 * layout.d_data);
}

}  // namespace weightsmith
