#include "crxo/estimands.hpp"

#include <cmath>

#include "crxo/errors.hpp"

namespace crxo {

double finite_wate(const FinitePopulation& pop, EstimandKind kind) {
  std::array<double, 2> period_n{0, 0};
  for (const auto& c : pop.clusters)
    for (int j = 0; j < 2; ++j) period_n[j] += double(c.cells[j].size());
  double num = 0.0, den = 0.0;
  for (const auto& c : pop.clusters) {
    const double nc = double(c.cells[0].size() + c.cells[1].size());
    for (int j = 0; j < 2; ++j) {
      const auto& cell = c.cells[j];
      if (cell.size() == 0) continue;
      double w = 1.0;
      switch (kind) {
        case EstimandKind::iATE: w = 1.0; break;
        case EstimandKind::cpATE: w = 1.0 / double(cell.size()); break;
        case EstimandKind::cATE: w = 1.0 / nc; break;
        case EstimandKind::pATE: w = 1.0 / period_n[j]; break;
      }
      for (std::size_t k = 0; k < cell.size(); ++k) {
        num += w * (cell.y1[k] - cell.y0[k]);
        den += w;
      }
    }
  }
  if (den == 0.0) throw ConfigError("finite population is empty");
  return num / den;
}

EstimandValues superpop_wate_exact(const DgpSpec& dgp) {
  dgp.check();
  double i_num = 0, i_den = 0, cp = 0, c = 0;
  std::array<double, 2> p_num{0, 0}, p_den{0, 0};
  for (const auto& s : dgp.subpopulations) {
    if (s.probability == 0.0) continue;
    const auto& d = s.effect;
    cp += s.probability * 0.5 * (d[0] + d[1]);
    double ek1 = 0, ek2 = 0, ec = 0;
    for (const auto& pt : cached_size_support(s.size)) {
      ek1 += pt.prob * pt.k1;
      ek2 += pt.prob * pt.k2;
      ec += pt.prob * (pt.k1 * d[0] + pt.k2 * d[1]) / double(pt.k1 + pt.k2);
    }
    i_num += s.probability * (ek1 * d[0] + ek2 * d[1]);
    i_den += s.probability * (ek1 + ek2);
    c += s.probability * ec;
    p_num[0] += s.probability * ek1 * d[0];
    p_num[1] += s.probability * ek2 * d[1];
    p_den[0] += s.probability * ek1;
    p_den[1] += s.probability * ek2;
  }
  EstimandValues v{};
  v[std::size_t(EstimandKind::iATE)] = i_num / i_den;
  v[std::size_t(EstimandKind::cpATE)] = cp;
  v[std::size_t(EstimandKind::cATE)] = c;
  v[std::size_t(EstimandKind::pATE)] = 0.5 * (p_num[0] / p_den[0] + p_num[1] / p_den[1]);
  return v;
}

MonteCarloEstimands superpop_wate_mc(const DgpSpec& dgp, std::size_t draws, std::uint64_t seed) {
  dgp.check();
  if (draws < 2) throw ConfigError("Monte Carlo estimands need at least 2 draws");
  Rng rng(seed);
  std::vector<double> k1(draws), k2(draws), d1(draws), d2(draws);
  for (std::size_t r = 0; r < draws; ++r) {
    const auto& s = dgp.subpopulations[draw_subpopulation(dgp, rng)];
    auto k = draw_sizes(s.size, rng);
    k1[r] = k[0];
    k2[r] = k[1];
    d1[r] = s.effect[0];
    d2[r] = s.effect[1];
  }
  const double n = double(draws);
  double sk1 = 0, sk2 = 0, sk1d = 0, sk2d = 0, scp = 0, sc = 0;
  for (std::size_t r = 0; r < draws; ++r) {
    sk1 += k1[r];
    sk2 += k2[r];
    sk1d += k1[r] * d1[r];
    sk2d += k2[r] * d2[r];
    scp += 0.5 * (d1[r] + d2[r]);
    sc += (k1[r] * d1[r] + k2[r] * d2[r]) / (k1[r] + k2[r]);
  }
  const double mk1 = sk1 / n, mk2 = sk2 / n;
  const double iate = (sk1d + sk2d) / (sk1 + sk2);
  const double r1 = sk1d / sk1, r2 = sk2d / sk2;
  MonteCarloEstimands out;
  out.draws = draws;
  out.value[std::size_t(EstimandKind::iATE)] = iate;
  out.value[std::size_t(EstimandKind::cpATE)] = scp / n;
  out.value[std::size_t(EstimandKind::cATE)] = sc / n;
  out.value[std::size_t(EstimandKind::pATE)] = 0.5 * (r1 + r2);

  // Linearised influence values; ratios use (a - R b) / E[b].
  std::vector<std::array<double, 4>> psi(draws);
  for (std::size_t r = 0; r < draws; ++r) {
    const double a = k1[r] * d1[r] + k2[r] * d2[r], b = k1[r] + k2[r];
    psi[r][std::size_t(EstimandKind::iATE)] = (a - iate * b) / (mk1 + mk2);
    psi[r][std::size_t(EstimandKind::cpATE)] = 0.5 * (d1[r] + d2[r]) - out.value[1];
    psi[r][std::size_t(EstimandKind::cATE)] = a / b - out.value[2];
    psi[r][std::size_t(EstimandKind::pATE)] =
        0.5 * ((k1[r] * d1[r] - r1 * k1[r]) / mk1 + (k2[r] * d2[r] - r2 * k2[r]) / mk2);
  }
  auto se_of = [&](auto&& f) {
    double m = 0, q = 0;
    for (std::size_t r = 0; r < draws; ++r) m += f(psi[r]);
    m /= n;
    for (std::size_t r = 0; r < draws; ++r) {
      double e = f(psi[r]) - m;
      q += e * e;
    }
    return std::sqrt(q / (n - 1) / n);
  };
  for (int a = 0; a < 4; ++a) {
    out.se[a] = se_of([a](const auto& p) { return p[a]; });
    for (int b = 0; b < 4; ++b)
      out.diff_se[a][b] = a == b ? 0.0 : se_of([a, b](const auto& p) { return p[a] - p[b]; });
  }
  return out;
}

const char* ternary_name(Ternary t) {
  switch (t) {
    case Ternary::Absent: return "no";
    case Ternary::Present: return "yes";
    case Ternary::Indeterminate: return "indeterminate";
  }
  return "?";
}

Ternary InformativeSizeReport::icps() const {
  if (icps_c.state == Ternary::Present && icps_p.state == Ternary::Present) return Ternary::Present;
  if (icps_c.state == Ternary::Absent || icps_p.state == Ternary::Absent) return Ternary::Absent;
  return Ternary::Indeterminate;
}

namespace {

SizeFlag make_flag(double diff, double se, double tol) {
  SizeFlag f{Ternary::Absent, diff, se};
  if (std::abs(diff) <= tol) return f;
  f.state = std::abs(diff) > 3.0 * se ? Ternary::Present : Ternary::Indeterminate;
  return f;
}

void fill_flags(InformativeSizeReport& rep, const std::array<std::array<double, 4>, 4>& dse) {
  const auto I = std::size_t(EstimandKind::iATE), CP = std::size_t(EstimandKind::cpATE),
             C = std::size_t(EstimandKind::cATE), P = std::size_t(EstimandKind::pATE);
  const auto& v = rep.values;
  rep.ics = make_flag(v[I] - v[C], dse[I][C], rep.tolerance);
  rep.ips = make_flag(v[I] - v[P], dse[I][P], rep.tolerance);
  rep.icps_c = make_flag(v[CP] - v[C], dse[CP][C], rep.tolerance);
  rep.icps_p = make_flag(v[CP] - v[P], dse[CP][P], rep.tolerance);
}

bool all_fixed(const DgpSpec& dgp) {
  for (const auto& s : dgp.subpopulations)
    if (s.size.kind != SizeSpec::Kind::Fixed) return false;
  return true;
}

}  // namespace

InformativeSizeReport classify_informative_sizes(const DgpSpec& dgp, double tolerance, std::size_t draws,
                                                 std::uint64_t seed) {
  if (!(tolerance >= 0.0)) throw ConfigError("tolerance must be >= 0");
  InformativeSizeReport rep;
  rep.tolerance = tolerance;
  std::array<std::array<double, 4>, 4> dse{};
  if (draws == 0 || all_fixed(dgp)) {
    rep.values = superpop_wate_exact(dgp);
    rep.exact = true;
  } else {
    auto mc = superpop_wate_mc(dgp, draws, seed);
    rep.values = mc.value;
    rep.se = mc.se;
    rep.exact = false;
    dse = mc.diff_se;
  }
  fill_flags(rep, dse);
  return rep;
}

InformativeSizeReport classify_finite(const FinitePopulation& pop, double tolerance) {
  InformativeSizeReport rep;
  rep.tolerance = tolerance;
  for (int k = 0; k < 4; ++k) rep.values[k] = finite_wate(pop, EstimandKind(k));
  fill_flags(rep, {});
  return rep;
}

}  // namespace crxo
