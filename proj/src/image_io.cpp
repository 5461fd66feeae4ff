#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include <opencv2/imgcodecs.hpp>

#include "segstereo/data_io.hpp"

namespace segstereo {

void write_kitti_disparity(const std::string& path, const Tensor& disparity,
                           const Tensor* valid) {
    const Shape& s = disparity.shape;
    if (s.n != 1 || s.c != 1)
        throw std::invalid_argument("write_kitti_disparity: expected [1,1,H,W]");
    cv::Mat m(s.h, s.w, CV_16UC1);
    for (int y = 0; y < s.h; ++y)
        for (int x = 0; x < s.w; ++x) {
            const double d = disparity.at(0, 0, y, x);
            const bool ok = (valid == nullptr || valid->at(0, 0, y, x) != 0.0);
            if (!ok) {
                m.at<uint16_t>(y, x) = 0;
                continue;
            }
            if (d < 0.0 || d >= 256.0)
                throw std::invalid_argument("write_kitti_disparity: value out of range");
            const long q = std::lround(d * 256.0);
            // quantized 0 would read back as invalid; keep it barely valid
            m.at<uint16_t>(y, x) = uint16_t(q == 0 ? 1 : q);
        }
    if (!cv::imwrite(path, m))
        throw std::runtime_error("write_kitti_disparity: cannot write " + path);
}

std::pair<Tensor, Tensor> read_kitti_disparity(const std::string& path) {
    cv::Mat m = cv::imread(path, cv::IMREAD_UNCHANGED);
    if (m.empty()) throw std::runtime_error("read_kitti_disparity: cannot read " + path);
    if (m.type() != CV_16UC1)
        throw std::runtime_error("read_kitti_disparity: not a 16-bit single-channel PNG");
    Tensor d = create({1, 1, m.rows, m.cols}, Fill::zeros());
    Tensor v = create({1, 1, m.rows, m.cols}, Fill::zeros());
    for (int y = 0; y < m.rows; ++y)
        for (int x = 0; x < m.cols; ++x) {
            const uint16_t raw = m.at<uint16_t>(y, x);
            if (raw == 0) continue;
            (*d.data)[d.index(0, 0, y, x)] = double(raw) / 256.0;
            (*v.data)[v.index(0, 0, y, x)] = 1.0;
        }
    return {d, v};
}

void write_png8(const std::string& path, const Tensor& image) {
    const Shape& s = image.shape;
    if (s.n != 1 || (s.c != 1 && s.c != 3))
        throw std::invalid_argument("write_png8: expected [1,1|3,H,W]");
    auto q = [](double v) {
        return uint8_t(std::lround(std::min(255.0, std::max(0.0, v))));
    };
    cv::Mat m;
    if (s.c == 1) {
        m = cv::Mat(s.h, s.w, CV_8UC1);
        for (int y = 0; y < s.h; ++y)
            for (int x = 0; x < s.w; ++x) m.at<uint8_t>(y, x) = q(image.at(0, 0, y, x));
    } else {
        m = cv::Mat(s.h, s.w, CV_8UC3);
        for (int y = 0; y < s.h; ++y)
            for (int x = 0; x < s.w; ++x)
                // OpenCV stores BGR
                m.at<cv::Vec3b>(y, x) = {q(image.at(0, 2, y, x)), q(image.at(0, 1, y, x)),
                                         q(image.at(0, 0, y, x))};
    }
    if (!cv::imwrite(path, m)) throw std::runtime_error("write_png8: cannot write " + path);
}

Tensor read_png8(const std::string& path) {
    cv::Mat m = cv::imread(path, cv::IMREAD_UNCHANGED);
    if (m.empty()) throw std::runtime_error("read_png8: cannot read " + path);
    if (m.type() == CV_8UC1) {
        Tensor t = create({1, 1, m.rows, m.cols}, Fill::zeros());
        for (int y = 0; y < m.rows; ++y)
            for (int x = 0; x < m.cols; ++x)
                (*t.data)[t.index(0, 0, y, x)] = double(m.at<uint8_t>(y, x));
        return t;
    }
    if (m.type() == CV_8UC3) {
        Tensor t = create({1, 3, m.rows, m.cols}, Fill::zeros());
        for (int y = 0; y < m.rows; ++y)
            for (int x = 0; x < m.cols; ++x) {
                const cv::Vec3b px = m.at<cv::Vec3b>(y, x);
                (*t.data)[t.index(0, 0, y, x)] = double(px[2]);
                (*t.data)[t.index(0, 1, y, x)] = double(px[1]);
                (*t.data)[t.index(0, 2, y, x)] = double(px[0]);
            }
        return t;
    }
    throw std::runtime_error("read_png8: unsupported pixel format in " + path);
}

void write_pfm(const std::string& path, const Tensor& map) {
    const Shape& s = map.shape;
    if (s.n != 1 || (s.c != 1 && s.c != 3))
        throw std::invalid_argument("write_pfm: expected [1,1|3,H,W]");
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("write_pfm: cannot open " + path);
    f << (s.c == 3 ? "PF" : "Pf") << "\n" << s.w << " " << s.h << "\n" << "-1.0" << "\n";
    // rows bottom-up, channels interleaved, little-endian float32
    for (int y = s.h - 1; y >= 0; --y)
        for (int x = 0; x < s.w; ++x)
            for (int c = 0; c < s.c; ++c) {
                const float v = float(map.at(0, c, y, x));
                f.write(reinterpret_cast<const char*>(&v), 4);
            }
    if (!f) throw std::runtime_error("write_pfm: write failed on " + path);
}

Tensor read_pfm(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("read_pfm: cannot open " + path);
    std::string magic;
    int w = 0, h = 0;
    double scale = 0.0;
    f >> magic >> w >> h >> scale;
    if ((magic != "Pf" && magic != "PF") || w < 1 || h < 1 || scale == 0.0 || !f)
        throw std::runtime_error("read_pfm: bad header in " + path);
    f.get();  // single whitespace after the scale line
    const int ch = magic == "PF" ? 3 : 1;
    Tensor t = create({1, ch, h, w}, Fill::zeros());
    std::vector<float> row(size_t(w) * ch);
    for (int y = h - 1; y >= 0; --y) {
        f.read(reinterpret_cast<char*>(row.data()), std::streamsize(row.size() * 4));
        if (!f) throw std::runtime_error("read_pfm: truncated payload in " + path);
        if (scale > 0.0)  // big-endian payload
            for (auto& v : row) {
                uint32_t b;
                std::memcpy(&b, &v, 4);
                b = __builtin_bswap32(b);
                std::memcpy(&v, &b, 4);
            }
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < ch; ++c)
                (*t.data)[t.index(0, c, y, x)] = double(row[size_t(x) * ch + c]);
    }
    return t;
}

}  // namespace segstereo
