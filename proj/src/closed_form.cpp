#include "crxo/closed_form.hpp"

#include <cmath>

#include "crxo/errors.hpp"

namespace crxo {

namespace {

double checked(double num, double den, const char* what) {
  if (den == 0.0 || !std::isfinite(den)) throw NumericalError(std::string("closed form undefined: ") + what);
  return num / den;
}

void require_equal_allocation(const std::vector<ClusterCells>& cells) {
  auto n = sequence_counts(cells);
  if (n[0] != n[1])
    throw ConfigError("closed form for inverse cluster-period weights assumes I/2 clusters per sequence");
}

// Independence estimator written with weighted counts n_ij and weighted sums t_ij.
double independence_expression(const std::vector<ClusterCells>& cells,
                               const std::vector<std::array<double, 2>>& n,
                               const std::vector<std::array<double, 2>>& t) {
  double t1_s1 = 0, t1_s0 = 0, t2_s1 = 0, t2_s0 = 0;
  double n1_s1 = 0, n1_s0 = 0, n2_s1 = 0, n2_s0 = 0, n1 = 0, n2 = 0;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const double S = cells[i].sequence;
    t1_s1 += S * t[i][0];
    t1_s0 += (1 - S) * t[i][0];
    t2_s1 += S * t[i][1];
    t2_s0 += (1 - S) * t[i][1];
    n1_s1 += S * n[i][0];
    n1_s0 += (1 - S) * n[i][0];
    n2_s1 += S * n[i][1];
    n2_s0 += (1 - S) * n[i][1];
    n1 += n[i][0];
    n2 += n[i][1];
  }
  const double den = n1_s1 * n1_s0 * n2 + n2_s1 * n2_s0 * n1;
  const double treated = t1_s1 * n1_s0 * n2 + n2_s1 * t2_s0 * n1;
  const double control = n1_s1 * t1_s0 * n2 + t2_s1 * n2_s0 * n1;
  return checked(treated, den, "independence denominator") - checked(control, den, "independence denominator");
}

// Four-term fixed-effects expression. a: precision, b/c: period-1/period-2
// shares, y1/y2: weighted cell sums.
double fixed_effect_expression(const std::vector<ClusterCells>& cells, const std::vector<double>& a,
                               const std::vector<double>& b, const std::vector<double>& c,
                               const std::vector<std::array<double, 2>>& y, double& l_out,
                               double& m_out) {
  double sa1 = 0, sa0 = 0;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    sa1 += cells[i].sequence * a[i];
    sa0 += (1 - cells[i].sequence) * a[i];
  }
  const double M = checked(1.0, sa1, "no clusters on sequence 1");
  const double L = checked(1.0, sa0, "no clusters on sequence 0");
  l_out = L;
  m_out = M;
  double t1 = 0, t2a = 0, t2b = 0, t3 = 0, t4 = 0;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const double S = cells[i].sequence;
    t1 += S * (y[i][0] - y[i][1]);
    t2a += (1 - S) * y[i][1];
    t2b += (1 - S) * c[i] * y[i][0];
    t3 += S * (b[i] - c[i]) * (y[i][0] + y[i][1]);
    t4 += (1 - S) * (b[i] - c[i]) * y[i][1];
  }
  return 0.25 * (M * t1 + L * (t2a - 2.0 * t2b) - M * t3 + L * t4);
}

// delta row of the inverse 3x3 exchangeable-type system, written out by cofactors.
double mixed_expression(const std::vector<ClusterCells>& cells, const std::vector<double>& A,
                        const std::vector<double>& B, const std::vector<double>& C) {
  double g11 = 0, g12 = 0, g13 = 0, sA = 0, sB = 0, sC = 0;
  double yd = 0, y1 = 0, y2 = 0;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const double S = cells[i].sequence;
    const auto& k = cells[i].k;
    const auto& s = cells[i].sum;
    g11 += S * A[i] + (1 - S) * B[i];
    g12 += S * A[i] + (1 - S) * C[i];
    g13 += S * C[i] + (1 - S) * B[i];
    sA += A[i];
    sB += B[i];
    sC += C[i];
    yd += S * s[0] * A[i] / k[0] + S * s[1] * C[i] / k[1] + (1 - S) * s[0] * C[i] / k[0] +
          (1 - S) * s[1] * B[i] / k[1];
    y1 += S * s[0] * A[i] / k[0] + S * s[1] * C[i] / k[1] + (1 - S) * s[0] * A[i] / k[0] +
          (1 - S) * s[1] * C[i] / k[1];
    y2 += S * s[0] * C[i] / k[0] + S * s[1] * B[i] / k[1] + (1 - S) * s[0] * C[i] / k[0] +
          (1 - S) * s[1] * B[i] / k[1];
  }
  const double r1 = sA * sB - sC * sC;
  const double r2 = -(g12 * sB - g13 * sC);
  const double r3 = g12 * sC - g13 * sA;
  const double det = g11 * r1 + g12 * r2 + g13 * r3;
  return checked(r1 * yd + r2 * y1 + r3 * y2, det, "singular exchangeable system");
}

std::vector<double> mixed_weights(const std::vector<ClusterCells>& cells, Weighting w) {
  auto tot = period_totals(cells);
  std::vector<double> out(cells.size(), 1.0);
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (w == Weighting::ClusterPeriod) out[i] = cells[i].k[0];
    if (w == Weighting::Cluster) out[i] = cells[i].n();
    if (w == Weighting::Period) out[i] = tot[0];
  }
  return out;
}

}  // namespace

ClosedFormTerms exchangeable_terms(const std::vector<ClusterCells>& cells, const VarianceComponents& vc) {
  ClosedFormTerms t;
  const double s2 = vc.sigma2_w, ta = vc.tau2_alpha;
  for (const auto& c : cells) {
    const double N = c.n();
    const double d = (s2 + (N - 1) * ta) / (s2 + N * ta) / s2;
    const double f = -ta / (s2 + N * ta) / s2;
    t.d.push_back(d);
    t.f.push_back(f);
    t.a.push_back(c.k[0] * (d + (c.k[0] - 1) * f));
    t.b.push_back(c.k[1] * (d + (c.k[1] - 1) * f));
    t.c.push_back(c.k[0] * c.k[1] * f);
    t.lambda.push_back(c.k[1] / c.k[0]);
  }
  return t;
}

ClosedFormTerms nested_terms(const std::vector<ClusterCells>& cells, const VarianceComponents& vc) {
  if (!balanced_within_clusters(cells))
    throw ConfigError("nested-exchangeable closed form requires K_i1 = K_i2");
  ClosedFormTerms t;
  const double s2 = vc.sigma2_w, ta = vc.tau2_alpha, tg = vc.tau2_gamma;
  for (const auto& c : cells) {
    const double K = c.k[0];
    const double den = std::pow(s2 + K * (ta + tg), 2) - std::pow(K * ta, 2);
    const double a = K * (s2 + K * (ta + tg)) / den;
    t.a.push_back(a);
    t.b.push_back(a);
    t.c.push_back(-K * (K * ta) / den);
    t.lambda.push_back(1.0);
  }
  return t;
}

ClosedFormTerms fixed_effect_terms(const std::vector<ClusterCells>& cells, Weighting weighting) {
  ClosedFormTerms t;
  auto tot = period_totals(cells);
  for (const auto& c : cells) {
    const double k1 = c.k[0], k2 = c.k[1];
    double a = 0, b = 0, cc = 0;
    switch (weighting) {
      case Weighting::None:
        a = k1 * k2 / (k1 + k2);
        b = k1 / (k1 + k2);
        cc = k2 / (k1 + k2);
        break;
      case Weighting::ClusterPeriod:
        a = 0.5;
        b = 0.5;
        cc = 0.5;
        break;
      case Weighting::Cluster:
        a = k1 * k2 / ((k1 + k2) * (k1 + k2));
        b = k1 / (k1 + k2);
        cc = k2 / (k1 + k2);
        break;
      case Weighting::Period: {
        const double den = tot[1] * k1 + tot[0] * k2;
        a = k1 * k2 / den;
        b = tot[1] * k1 / den;
        cc = tot[0] * k2 / den;
        break;
      }
    }
    t.fe_a.push_back(a);
    t.fe_b.push_back(b);
    t.fe_c.push_back(cc);
    t.lambda.push_back(k2 / k1);
  }
  double s1 = 0, s0 = 0;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    s1 += cells[i].sequence * t.fe_a[i];
    s0 += (1 - cells[i].sequence) * t.fe_a[i];
  }
  t.m = s1 > 0 ? 1.0 / s1 : NAN;
  t.l = s0 > 0 ? 1.0 / s0 : NAN;
  return t;
}

double closed_form_cells(const std::vector<ClusterCells>& cells, const ModelSpec& spec,
                         const VarianceComponents& vc) {
  if (auto why = inadmissibility(spec, balanced_within_clusters(cells))) throw InadmissibleError(*why);
  const std::size_t I = cells.size();
  auto tot = period_totals(cells);

  if (spec.structure == Structure::IEE) {
    if (spec.weighting == Weighting::ClusterPeriod) {
      // (1/I) sum_i [S_i (ybar_i1 - ybar_i2) + (1 - S_i)(ybar_i2 - ybar_i1)]
      require_equal_allocation(cells);
      double acc = 0;
      for (const auto& c : cells) {
        const double S = c.sequence;
        const double m1 = c.sum[0] / c.k[0], m2 = c.sum[1] / c.k[1];
        acc += S * (m1 - m2) + (1 - S) * (m2 - m1);
      }
      return acc / double(I);
    }
    std::vector<std::array<double, 2>> n(I), t(I);
    for (std::size_t i = 0; i < I; ++i) {
      const auto& c = cells[i];
      std::array<double, 2> div{1.0, 1.0};
      if (spec.weighting == Weighting::Cluster) div = {c.n(), c.n()};
      if (spec.weighting == Weighting::Period) div = tot;
      n[i] = {c.k[0] / div[0], c.k[1] / div[1]};
      t[i] = {c.sum[0] / div[0], c.sum[1] / div[1]};
    }
    return independence_expression(cells, n, t);
  }

  if (spec.structure == Structure::FE) {
    if (spec.weighting == Weighting::ClusterPeriod) {
      require_equal_allocation(cells);
      double a = 0, b = 0;
      for (const auto& c : cells) {
        const double S = c.sequence;
        const double m1 = c.sum[0] / c.k[0], m2 = c.sum[1] / c.k[1];
        a += S * (m1 - m2);
        b += (1 - S) * m2 - (1 - S) * m1;
      }
      const double half = double(I) / 2.0;
      return 0.5 * (a / half + b / half);
    }
    auto terms = fixed_effect_terms(cells, spec.weighting);
    std::vector<std::array<double, 2>> y(I);
    for (std::size_t i = 0; i < I; ++i) {
      const auto& c = cells[i];
      std::array<double, 2> div{1.0, 1.0};
      if (spec.weighting == Weighting::Cluster) div = {c.n(), c.n()};
      if (spec.weighting == Weighting::Period) div = tot;
      y[i] = {c.sum[0] / div[0], c.sum[1] / div[1]};
    }
    double l = 0, m = 0;
    return fixed_effect_expression(cells, terms.fe_a, terms.fe_b, terms.fe_c, y, l, m);
  }

  vc.check();
  auto terms = spec.structure == Structure::EME ? exchangeable_terms(cells, vc) : nested_terms(cells, vc);
  auto w = mixed_weights(cells, spec.weighting);
  for (std::size_t i = 0; i < I; ++i) {
    terms.a[i] /= w[i];
    terms.b[i] /= w[i];
    terms.c[i] /= w[i];
  }
  return mixed_expression(cells, terms.a, terms.b, terms.c);
}

double closed_form_estimate(const TrialDataset& data, const ModelSpec& spec, const VarianceComponents& vc) {
  require_valid(data);
  return closed_form_cells(summarize_cells(data), spec, vc);
}

}  // namespace crxo
