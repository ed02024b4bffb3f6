#pragma once

#include <string>
#include <vector>

namespace mesa {

/// One OCR word/box row: pixel geometry plus the engine's transcription.
struct OcrBox {
    std::string image_id;
    std::string box_id;
    int left = 0;
    int top = 0;
    int width = 0;
    int height = 0;
    std::string text;
};

struct BoxTable {
    std::vector<OcrBox> boxes;
    int skipped_rows = 0;  // malformed rows dropped with a warning count
};

/// Native tab-separated box table with header
/// image_id  box_id  left  top  width  height  text
BoxTable parse_box_table(const std::string& path);

/// Adapter for the Tesseract TSV layout (12 columns, header row); keeps
/// word-level rows (level 5) with non-empty text.
BoxTable parse_tesseract_tsv(const std::string& path, const std::string& image_id = "tsv");

void write_box_table(const BoxTable& table, const std::string& path);

}  // namespace mesa
