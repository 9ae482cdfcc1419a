#ifndef STDN_TESTS_SYNTHETIC_HPP
#define STDN_TESTS_SYNTHETIC_HPP

#include "stdn/raster.hpp"

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace stdn::testsupport {

/// Two-texture image: orientation gratings (vertical stripes vs horizontal
/// stripes) with a small colour shift between the regions, split by an
/// axis-aligned line at a randomized position. Returns the image and its
/// ground-truth labels.
std::pair<ChannelField, LabelMap> make_two_texture(std::uint64_t seed, int height = 32,
                                                   int width = 32);

/// Same texture family with a pinned split: label 1 where x >= cut when
/// split_on_x, else where y >= cut. Useful for images whose true partition
/// must match a known initialization.
std::pair<ChannelField, LabelMap> make_two_texture_cut(std::uint64_t seed, int cut,
                                                       bool split_on_x, int height = 32,
                                                       int width = 32);

std::vector<std::pair<ChannelField, LabelMap>> make_dataset(int count, std::uint64_t seed,
                                                            int height = 32, int width = 32);

/// Writes count pairs as NNN.ppm / NNN_labels.pgm under dir (created if
/// needed); returns the image paths.
std::vector<std::string> write_dataset(const std::string& dir, int count, std::uint64_t seed,
                                       int height = 32, int width = 32);

} // namespace stdn::testsupport

#endif
