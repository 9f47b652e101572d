#pragma once

#include "datom/signal.hpp"

#include <iosfwd>
#include <string>

namespace datom {

// Text form:
//   datom-dataset v1, T=<int>, n=<int>, labels=<0|1>, masks=<0|1>
// followed by one record per line: T comma-separated samples, then the label
// (when labels=1), then the mask as a 0/1 string of length T (when masks=1).
//
// Binary form: magic "DTMD", then u32 version, T, n, flags (bit 0 = labels,
// bit 1 = masks), all little-endian; float32 samples row-major; u32 labels;
// one 0/1 byte per mask entry, row-major.
void write_dataset_text(std::ostream& os, const Dataset& ds);
void write_dataset_binary(std::ostream& os, const Dataset& ds);

// Writes text unless the path ends in ".bin".
void save_dataset(const std::string& path, const Dataset& ds);

// Reads either form (sniffs the magic).
Dataset load_dataset(const std::string& path);
Dataset read_dataset_text(std::istream& is);
Dataset read_dataset_binary(std::istream& is);

}  // namespace datom
