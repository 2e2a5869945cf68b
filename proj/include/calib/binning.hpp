#pragma once

#include <string>
#include <vector>

namespace calib {

enum class BinningScheme { EqualWidth, EqualMass };

BinningScheme parse_scheme(const std::string& s);
std::string scheme_str(BinningScheme s);

/// Bin edges spanning [0,1], strictly ascending. Equal-width ignores the
/// scores; equal-mass places interior edges at linear-interpolation quantiles
/// of the scores, collapsing duplicate edges (fewer effective bins).
std::vector<double> make_bin_edges(int n_bins, BinningScheme scheme,
                                   const std::vector<double>& scores);

/// Index of the bin containing s. Bins are [e_i, e_{i+1}) with the last bin
/// closed at 1. Out-of-range scores clamp to the first/last bin.
int bin_index(const std::vector<double>& edges, double s);

}  // namespace calib
