#include "mesa/ocr_boxes.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace mesa {

namespace {

std::vector<std::string> split_tabs(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    std::istringstream ss(line);
    while (std::getline(ss, field, '\t')) out.push_back(field);
    if (!line.empty() && line.back() == '\t') out.push_back("");
    return out;
}

bool parse_int(const std::string& s, int& out) {
    try {
        size_t pos = 0;
        out = std::stoi(s, &pos);
        return pos == s.size();
    } catch (...) {
        return false;
    }
}

std::string strip_cr(std::string s) {
    if (!s.empty() && s.back() == '\r') s.pop_back();
    return s;
}

}  // namespace

BoxTable parse_box_table(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open box table: " + path);
    BoxTable table;
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("empty box table: " + path);
    const auto header = split_tabs(strip_cr(line));
    const std::vector<std::string> want = {"image_id", "box_id", "left", "top", "width", "height", "text"};
    if (std::vector<std::string>(header.begin(), header.begin() + std::min(header.size(), want.size())) != want)
        throw std::runtime_error("box table header mismatch in " + path);

    while (std::getline(in, line)) {
        line = strip_cr(line);
        if (line.empty()) continue;
        const auto f = split_tabs(line);
        OcrBox box;
        if (f.size() < 7) {
            ++table.skipped_rows;
            continue;
        }
        box.image_id = f[0];
        box.box_id = f[1];
        if (!parse_int(f[2], box.left) || !parse_int(f[3], box.top) || !parse_int(f[4], box.width) ||
            !parse_int(f[5], box.height) || box.width <= 0 || box.height <= 0) {
            ++table.skipped_rows;
            continue;
        }
        box.text = f[6];
        table.boxes.push_back(std::move(box));
    }
    return table;
}

BoxTable parse_tesseract_tsv(const std::string& path, const std::string& image_id) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open tesseract tsv: " + path);
    BoxTable table;
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("empty tesseract tsv: " + path);
    const auto header = split_tabs(strip_cr(line));
    // level page_num block_num par_num line_num word_num left top width height conf text
    if (header.size() < 12 || header[0] != "level" || header[11] != "text")
        throw std::runtime_error("unrecognized tesseract tsv header in " + path);

    int row = 0;
    while (std::getline(in, line)) {
        line = strip_cr(line);
        if (line.empty()) continue;
        const auto f = split_tabs(line);
        ++row;
        if (f.size() < 12) {
            ++table.skipped_rows;
            continue;
        }
        int level = 0;
        if (!parse_int(f[0], level)) {
            ++table.skipped_rows;
            continue;
        }
        if (level != 5) continue;  // keep word rows only
        OcrBox box;
        box.image_id = image_id;
        box.box_id = "w" + std::to_string(row);
        if (!parse_int(f[6], box.left) || !parse_int(f[7], box.top) || !parse_int(f[8], box.width) ||
            !parse_int(f[9], box.height) || box.width <= 0 || box.height <= 0) {
            ++table.skipped_rows;
            continue;
        }
        box.text = f[11];
        if (box.text.empty()) continue;
        table.boxes.push_back(std::move(box));
    }
    return table;
}

void write_box_table(const BoxTable& table, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write box table: " + path);
    out << "image_id\tbox_id\tleft\ttop\twidth\theight\ttext\n";
    for (const auto& b : table.boxes)
        out << b.image_id << '\t' << b.box_id << '\t' << b.left << '\t' << b.top << '\t' << b.width
            << '\t' << b.height << '\t' << b.text << '\n';
}

}  // namespace mesa
