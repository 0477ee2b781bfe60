#pragma once

#include <cstdint>
#include <vector>

#include "nedsim/error.hpp"

namespace nedsim::valuation {

enum class ProtocolKind { FA, BA, KAccept };

// Contention-resolution protocol. KAccept finalizes at the k-th acceptance
// (or exhaustion of respondents) and matches the best collected acceptance;
// k = 1 is FA, k = |S| is BA.
struct Protocol {
    ProtocolKind kind = ProtocolKind::FA;
    int k = 1;  // only meaningful for KAccept

    static Protocol fa() { return {ProtocolKind::FA, 1}; }
    static Protocol ba() { return {ProtocolKind::BA, 1}; }
    static Protocol k_accept(int k) { return {ProtocolKind::KAccept, k}; }
};

struct Offer {
    double weight = 0.0;       // w_rd >= 0
    double accept_prob = 0.0;  // p_d in [0,1]
};

// Candidate drivers for one ride. Exact evaluation enumerates the 2^|S|
// accept-sets, so the size is capped.
struct OfferSet {
    std::vector<Offer> entries;

    static constexpr int kEnumerationCap = 20;

    std::size_t size() const { return entries.size(); }
    void check_cap(const char* op) const;
};

// Expected realized score under first-accept: the winner is a uniformly
// random member of the accept-set.
double fa_value(const OfferSet& offers);

// Expected realized score under best-accept (max weight over the
// accept-set). Computed by the sorted-scan form; ba_value_enum is the
// subset-enumeration form kept as a cross-check.
double ba_value(const OfferSet& offers);
double ba_value_enum(const OfferSet& offers);

// Expected realized score when the platform stops at the k-th acceptance
// (responders arrive in uniformly random order) and takes the best of the
// collected acceptances.
double k_accept_value(const OfferSet& offers, int k);

double value(const Protocol& protocol, const OfferSet& offers);

double marginal_gain(const Protocol& protocol, const OfferSet& offers,
                     const Offer& candidate);

struct McEstimate {
    double mean = 0.0;
    double std_err = 0.0;
};

// Independent Monte-Carlo oracle: simulates accept draws and response
// orderings. Unbiased; deterministic given seed.
McEstimate mc_value_oracle(const Protocol& protocol, const OfferSet& offers,
                           std::int64_t n_samples, std::uint64_t seed);

}  // namespace nedsim::valuation
