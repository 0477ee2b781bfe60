#include "nedsim/valuation.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "nedsim/rng.hpp"

namespace nedsim::valuation {

void OfferSet::check_cap(const char* op) const {
    if (int(entries.size()) > kEnumerationCap)
        throw Error("valuation", op,
                    "offer set size " + std::to_string(entries.size()) +
                        " exceeds enumeration cap " + std::to_string(kEnumerationCap));
}

namespace {

// Entries sorted by descending weight (ties by original index) so that any
// bitmask subset is already weight-ordered.
std::vector<Offer> sorted_desc(const OfferSet& offers) {
    std::vector<Offer> v = offers.entries;
    std::stable_sort(v.begin(), v.end(),
                     [](const Offer& a, const Offer& b) { return a.weight > b.weight; });
    return v;
}

constexpr int kMaxN = OfferSet::kEnumerationCap + 1;

const std::array<std::array<double, kMaxN + 1>, kMaxN + 1>& binomials() {
    static const auto table = [] {
        std::array<std::array<double, kMaxN + 1>, kMaxN + 1> c{};
        for (int n = 0; n <= kMaxN; ++n) {
            c[n][0] = 1.0;
            for (int r = 1; r <= n; ++r)
                c[n][r] = c[n - 1][r - 1] + (r <= n - 1 ? c[n - 1][r] : 0.0);
        }
        return c;
    }();
    return table;
}

}  // namespace

double fa_value(const OfferSet& offers) {
    offers.check_cap("fa_value");
    const auto& e = offers.entries;
    const int n = int(e.size());
    double total = 0.0;
    for (unsigned mask = 1; mask < (1u << n); ++mask) {
        double prob = 1.0, sum_w = 0.0;
        int cnt = 0;
        for (int i = 0; i < n; ++i) {
            if (mask & (1u << i)) {
                prob *= e[i].accept_prob;
                sum_w += e[i].weight;
                ++cnt;
            } else {
                prob *= 1.0 - e[i].accept_prob;
            }
        }
        total += prob * (sum_w / cnt);
    }
    return total;
}

double ba_value_enum(const OfferSet& offers) {
    offers.check_cap("ba_value");
    const auto& e = offers.entries;
    const int n = int(e.size());
    double total = 0.0;
    for (unsigned mask = 1; mask < (1u << n); ++mask) {
        double prob = 1.0, max_w = 0.0;
        for (int i = 0; i < n; ++i) {
            if (mask & (1u << i)) {
                prob *= e[i].accept_prob;
                max_w = std::max(max_w, e[i].weight);
            } else {
                prob *= 1.0 - e[i].accept_prob;
            }
        }
        total += prob * max_w;
    }
    return total;
}

double ba_value(const OfferSet& offers) {
    offers.check_cap("ba_value");
    // Sorted-scan form: sum_i p_i w_i prod_{j<i} (1 - p_j), descending weight.
    auto v = sorted_desc(offers);
    double total = 0.0, survive = 1.0;
    for (const Offer& o : v) {
        total += survive * o.accept_prob * o.weight;
        survive *= 1.0 - o.accept_prob;
    }
    return total;
}

double k_accept_value(const OfferSet& offers, int k) {
    if (k < 1) throw Error("valuation", "k_accept_value", "k must be >= 1");
    offers.check_cap("k_accept_value");
    const auto v = sorted_desc(offers);
    const int n = int(v.size());
    const auto& C = binomials();
    double total = 0.0;
    // For an accept-set T of size t, the first min(k,t) acceptances form a
    // uniform subset of T; E[max] = sum over T's members (sorted desc) of
    // w_(j) * C(t-j, m-1) / C(t, m).
    for (unsigned mask = 1; mask < (1u << n); ++mask) {
        double prob = 1.0;
        int t = 0;
        std::array<double, kMaxN> w{};
        for (int i = 0; i < n; ++i) {
            if (mask & (1u << i)) {
                prob *= v[i].accept_prob;
                w[t++] = v[i].weight;  // still descending within the subset
            } else {
                prob *= 1.0 - v[i].accept_prob;
            }
        }
        const int m = std::min(k, t);
        double avg_max = 0.0;
        for (int j = 1; j <= t - m + 1; ++j)
            avg_max += w[j - 1] * C[t - j][m - 1];
        avg_max /= C[t][m];
        total += prob * avg_max;
    }
    return total;
}

double value(const Protocol& protocol, const OfferSet& offers) {
    switch (protocol.kind) {
        case ProtocolKind::FA: return fa_value(offers);
        case ProtocolKind::BA: return ba_value(offers);
        case ProtocolKind::KAccept: return k_accept_value(offers, protocol.k);
    }
    throw Error("valuation", "value", "unknown protocol");
}

double marginal_gain(const Protocol& protocol, const OfferSet& offers,
                     const Offer& candidate) {
    OfferSet extended = offers;
    extended.entries.push_back(candidate);
    extended.check_cap("marginal_gain");
    return value(protocol, extended) - value(protocol, offers);
}

McEstimate mc_value_oracle(const Protocol& protocol, const OfferSet& offers,
                           std::int64_t n_samples, std::uint64_t seed) {
    if (n_samples < 1)
        throw Error("valuation", "mc_value_oracle", "n_samples must be >= 1");
    offers.check_cap("mc_value_oracle");
    const auto& e = offers.entries;
    const int n = int(e.size());
    SplitMix64 rng(derive_seed(seed, 0x9d0c));

    double sum = 0.0, sum_sq = 0.0;
    std::array<int, kMaxN> acceptors{};
    for (std::int64_t s = 0; s < n_samples; ++s) {
        int cnt = 0;
        for (int i = 0; i < n; ++i)
            if (rng.uniform() < e[i].accept_prob) acceptors[cnt++] = i;
        double realized = 0.0;
        if (cnt > 0) {
            switch (protocol.kind) {
                case ProtocolKind::FA:
                    realized = e[acceptors[rng.below(cnt)]].weight;
                    break;
                case ProtocolKind::BA:
                    for (int i = 0; i < cnt; ++i)
                        realized = std::max(realized, e[acceptors[i]].weight);
                    break;
                case ProtocolKind::KAccept: {
                    // Partial Fisher-Yates: the first min(k,cnt) responders are a
                    // uniform subset of the acceptors.
                    const int m = std::min(protocol.k, cnt);
                    for (int i = 0; i < m; ++i) {
                        const int j = i + int(rng.below(cnt - i));
                        std::swap(acceptors[i], acceptors[j]);
                        realized = std::max(realized, e[acceptors[i]].weight);
                    }
                    break;
                }
            }
        }
        sum += realized;
        sum_sq += realized * realized;
    }
    McEstimate est;
    est.mean = sum / double(n_samples);
    if (n_samples > 1) {
        const double var =
            std::max(0.0, (sum_sq - sum * sum / double(n_samples)) / double(n_samples - 1));
        est.std_err = std::sqrt(var / double(n_samples));
    }
    return est;
}

}  // namespace nedsim::valuation
