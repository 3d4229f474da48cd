// vtdcodec: small H.265 transcoder used by the vtd pipeline as its default
// external codec backend. Subcommands map one-to-one onto the pipeline's
// template slots (probe/decode/encode/transcode/extract/mux) so an ffmpeg
// wrapper can be substituted through the config file without code changes.

extern "C" {
#include <libavcodec/avcodec.h>
#include <libavcodec/bsf.h>
#include <libavformat/avformat.h>
#include <libavutil/imgutils.h>
#include <libavutil/opt.h>
#include <libswscale/swscale.h>
}

#include <CLI11.hpp>

#include <atomic>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <string>
#include <vector>

namespace {

std::atomic<long> g_log_errors{0};

void counting_log_cb(void* ptr, int level, const char* fmt, va_list vl) {
  if (level <= AV_LOG_ERROR) g_log_errors.fetch_add(1);
  if (level <= AV_LOG_FATAL) av_log_default_callback(ptr, level, fmt, vl);
}

[[noreturn]] void die(const std::string& msg) {
  std::fprintf(stderr, "vtdcodec: %s\n", msg.c_str());
  std::exit(1);
}

std::string av_err(int rc) {
  char buf[AV_ERROR_MAX_STRING_SIZE] = {0};
  av_strerror(rc, buf, sizeof(buf));
  return buf;
}

struct InputVideo {
  AVFormatContext* fmt = nullptr;
  AVCodecContext* dec = nullptr;
  int stream_index = -1;

  ~InputVideo() {
    if (dec) avcodec_free_context(&dec);
    if (fmt) avformat_close_input(&fmt);
  }

  AVStream* stream() const { return fmt->streams[stream_index]; }
};

void open_input(InputVideo& in, const std::string& path, bool with_decoder) {
  int rc = avformat_open_input(&in.fmt, path.c_str(), nullptr, nullptr);
  if (rc < 0) die("cannot open input '" + path + "': " + av_err(rc));
  rc = avformat_find_stream_info(in.fmt, nullptr);
  if (rc < 0) die("cannot probe streams: " + av_err(rc));
  in.stream_index = av_find_best_stream(in.fmt, AVMEDIA_TYPE_VIDEO, -1, -1, nullptr, 0);
  if (in.stream_index < 0) die("no video stream in '" + path + "'");
  if (!with_decoder) return;
  const AVCodec* codec = avcodec_find_decoder(in.stream()->codecpar->codec_id);
  if (!codec) die("no decoder for stream codec");
  in.dec = avcodec_alloc_context3(codec);
  avcodec_parameters_to_context(in.dec, in.stream()->codecpar);
  in.dec->thread_count = 1;
  rc = avcodec_open2(in.dec, codec, nullptr);
  if (rc < 0) die("cannot open decoder: " + av_err(rc));
}

double stream_duration_s(const InputVideo& in, int64_t packet_count) {
  const AVStream* st = in.stream();
  if (st->duration > 0)
    return static_cast<double>(st->duration) * av_q2d(st->time_base);
  if (in.fmt->duration > 0)
    return static_cast<double>(in.fmt->duration) / AV_TIME_BASE;
  const AVRational fps = st->avg_frame_rate;
  if (fps.num > 0 && packet_count > 0)
    return static_cast<double>(packet_count) * fps.den / fps.num;
  return 0.0;
}

struct Encoder {
  AVFormatContext* fmt = nullptr;
  AVCodecContext* enc = nullptr;
  AVStream* st = nullptr;
  SwsContext* sws = nullptr;
  AVFrame* yuv = nullptr;
  int64_t next_pts = 0;

  ~Encoder() {
    if (yuv) av_frame_free(&yuv);
    if (sws) sws_freeContext(sws);
    if (enc) avcodec_free_context(&enc);
    if (fmt) {
      if (fmt->pb) avio_closep(&fmt->pb);
      avformat_free_context(fmt);
    }
  }
};

// crf >= 0 selects constant-quality mode; otherwise bit_rate_bps drives ABR.
void open_encoder(Encoder& e, const std::string& path, int width, int height,
                  AVRational fps, int crf, int64_t bit_rate_bps) {
  if (width % 2 || height % 2) die("H.265 4:2:0 encode needs even dimensions");
  int rc = avformat_alloc_output_context2(&e.fmt, nullptr, "mp4", path.c_str());
  if (rc < 0 || !e.fmt) die("cannot create mp4 muxer: " + av_err(rc));
  e.fmt->flags |= AVFMT_FLAG_BITEXACT;

  const AVCodec* codec = avcodec_find_encoder_by_name("libx265");
  if (!codec) die("libx265 encoder not available in this libavcodec build");
  e.enc = avcodec_alloc_context3(codec);
  e.enc->width = width;
  e.enc->height = height;
  e.enc->time_base = av_inv_q(fps);
  e.enc->framerate = fps;
  e.enc->pix_fmt = AV_PIX_FMT_YUV420P;
  e.enc->thread_count = 1;
  e.enc->flags |= AV_CODEC_FLAG_BITEXACT;
  // single-threaded, no B-frames: bitstreams stay reproducible and re-muxable
  // with pts == dts after bit-error injection
  std::string params = "log-level=error:pools=none:frame-threads=1:bframes=0";
  if (crf >= 0) {
    av_opt_set(e.enc->priv_data, "crf", std::to_string(crf).c_str(), 0);
  } else {
    e.enc->bit_rate = bit_rate_bps;
    // VBV keeps the average-bitrate controller honest at the low rates small
    // test videos run at
    const long kbps = std::max<long>(1, bit_rate_bps / 1000);
    params += ":vbv-maxrate=" + std::to_string(kbps) +
              ":vbv-bufsize=" + std::to_string(kbps);
  }
  av_opt_set(e.enc->priv_data, "x265-params", params.c_str(), 0);
  if (e.fmt->oformat->flags & AVFMT_GLOBALHEADER)
    e.enc->flags |= AV_CODEC_FLAG_GLOBAL_HEADER;
  rc = avcodec_open2(e.enc, codec, nullptr);
  if (rc < 0) die("cannot open libx265: " + av_err(rc));

  e.st = avformat_new_stream(e.fmt, nullptr);
  avcodec_parameters_from_context(e.st->codecpar, e.enc);
  e.st->time_base = e.enc->time_base;
  rc = avio_open(&e.fmt->pb, path.c_str(), AVIO_FLAG_WRITE);
  if (rc < 0) die("cannot open output '" + path + "': " + av_err(rc));
  rc = avformat_write_header(e.fmt, nullptr);
  if (rc < 0) die("cannot write mp4 header: " + av_err(rc));

  e.yuv = av_frame_alloc();
  e.yuv->format = AV_PIX_FMT_YUV420P;
  e.yuv->width = width;
  e.yuv->height = height;
  av_frame_get_buffer(e.yuv, 0);
}

void encoder_drain_packets(Encoder& e, AVPacket* pkt) {
  while (true) {
    const int rc = avcodec_receive_packet(e.enc, pkt);
    if (rc == AVERROR(EAGAIN) || rc == AVERROR_EOF) break;
    if (rc < 0) die("encode: " + av_err(rc));
    pkt->duration = 1;  // one frame in encoder time base; keeps durations exact
    av_packet_rescale_ts(pkt, e.enc->time_base, e.st->time_base);
    pkt->stream_index = e.st->index;
    if (av_interleaved_write_frame(e.fmt, pkt) < 0) die("mux: write frame failed");
  }
}

void encoder_push(Encoder& e, const AVFrame* frame, AVPacket* pkt) {
  int rc = avcodec_send_frame(e.enc, frame);
  if (rc < 0) die("encode send: " + av_err(rc));
  encoder_drain_packets(e, pkt);
}

void encoder_finish(Encoder& e, AVPacket* pkt) {
  avcodec_send_frame(e.enc, nullptr);
  encoder_drain_packets(e, pkt);
  if (av_write_trailer(e.fmt) < 0) die("mux: write trailer failed");
}

// ---- probe ----------------------------------------------------------------

int cmd_probe(const std::string& input) {
  InputVideo in;
  open_input(in, input, false);
  AVPacket* pkt = av_packet_alloc();
  int64_t packets = 0, stream_bytes = 0;
  while (av_read_frame(in.fmt, pkt) >= 0) {
    if (pkt->stream_index == in.stream_index) {
      packets++;
      stream_bytes += pkt->size;
    }
    av_packet_unref(pkt);
  }
  av_packet_free(&pkt);

  const AVStream* st = in.stream();
  const AVRational fps = st->avg_frame_rate.num > 0 ? st->avg_frame_rate : AVRational{24, 1};
  const double duration = stream_duration_s(in, packets);
  std::printf("width=%d\n", st->codecpar->width);
  std::printf("height=%d\n", st->codecpar->height);
  std::printf("fps=%d/%d\n", fps.num, fps.den);
  std::printf("frames=%lld\n", static_cast<long long>(packets));
  std::printf("duration_s=%.6f\n", duration);
  std::printf("stream_bytes=%lld\n", static_cast<long long>(stream_bytes));
  const double stream_rate = duration > 0 ? 8.0 * static_cast<double>(stream_bytes) / duration : 0.0;
  std::printf("stream_bit_rate=%.0f\n", stream_rate);
  std::printf("container_bit_rate=%lld\n", static_cast<long long>(in.fmt->bit_rate));
  return 0;
}

// ---- decode ---------------------------------------------------------------

int cmd_decode(const std::string& input, const std::string& out_path, bool conceal) {
  InputVideo in;
  open_input(in, input, true);
  if (conceal) {
    // keep going on bitstream damage; the frame counter and error counter
    // tell the caller how degraded the result is
    in.dec->err_recognition = 0;
    in.dec->workaround_bugs = FF_BUG_AUTODETECT;
  } else {
    in.dec->err_recognition = AV_EF_EXPLODE;
  }

  std::ofstream os(out_path, std::ios::binary | std::ios::trunc);
  if (!os) die("cannot open raw output '" + out_path + "'");

  AVPacket* pkt = av_packet_alloc();
  AVFrame* frame = av_frame_alloc();
  SwsContext* sws = nullptr;
  std::vector<uint8_t> rgb;
  int out_w = 0, out_h = 0;
  int64_t frames = 0, packets = 0, hard_errors = 0;

  auto sink_frame = [&](AVFrame* f) {
    if (!sws) {
      out_w = f->width;
      out_h = f->height;
      sws = sws_getContext(f->width, f->height, static_cast<AVPixelFormat>(f->format),
                           f->width, f->height, AV_PIX_FMT_RGB24,
                           SWS_BILINEAR, nullptr, nullptr, nullptr);
      rgb.resize(static_cast<size_t>(f->width) * f->height * 3);
    }
    uint8_t* dst[1] = {rgb.data()};
    int dst_stride[1] = {out_w * 3};
    sws_scale(sws, f->data, f->linesize, 0, f->height, dst, dst_stride);
    os.write(reinterpret_cast<const char*>(rgb.data()), static_cast<std::streamsize>(rgb.size()));
    frames++;
  };

  auto receive_all = [&]() {
    while (true) {
      const int rc = avcodec_receive_frame(in.dec, frame);
      if (rc == AVERROR(EAGAIN) || rc == AVERROR_EOF) break;
      if (rc < 0) {
        hard_errors++;
        break;
      }
      sink_frame(frame);
    }
  };

  while (av_read_frame(in.fmt, pkt) >= 0) {
    if (pkt->stream_index != in.stream_index) {
      av_packet_unref(pkt);
      continue;
    }
    packets++;
    const int rc = avcodec_send_packet(in.dec, pkt);
    if (rc < 0 && rc != AVERROR(EAGAIN)) {
      hard_errors++;
      if (!conceal) die("decode: " + av_err(rc));
    }
    receive_all();
    av_packet_unref(pkt);
  }
  avcodec_send_packet(in.dec, nullptr);
  receive_all();

  if (sws) sws_freeContext(sws);
  av_frame_free(&frame);
  av_packet_free(&pkt);

  std::printf("width=%d\n", out_w);
  std::printf("height=%d\n", out_h);
  std::printf("frames=%lld\n", static_cast<long long>(frames));
  std::printf("packets=%lld\n", static_cast<long long>(packets));
  std::printf("decode_errors=%lld\n",
              static_cast<long long>(hard_errors + g_log_errors.load()));
  return frames > 0 ? 0 : 1;
}

// ---- encode (raw rgb24 -> mp4) ---------------------------------------------

int cmd_encode(const std::string& raw_path, const std::string& out_path, int width,
               int height, const std::string& fps_str, int crf, int64_t bitrate_bps) {
  AVRational fps;
  if (std::sscanf(fps_str.c_str(), "%d/%d", &fps.num, &fps.den) != 2) {
    fps.den = 1;
    if (std::sscanf(fps_str.c_str(), "%d", &fps.num) != 1) die("bad --fps value");
  }
  std::ifstream is(raw_path, std::ios::binary);
  if (!is) die("cannot open raw input '" + raw_path + "'");

  Encoder e;
  open_encoder(e, out_path, width, height, fps, crf, bitrate_bps);
  SwsContext* sws = sws_getContext(width, height, AV_PIX_FMT_RGB24, width, height,
                                   AV_PIX_FMT_YUV420P, SWS_BILINEAR, nullptr, nullptr, nullptr);

  const size_t frame_bytes = static_cast<size_t>(width) * height * 3;
  std::vector<uint8_t> rgb(frame_bytes);
  AVPacket* pkt = av_packet_alloc();
  int64_t frames = 0;
  while (is.read(reinterpret_cast<char*>(rgb.data()), static_cast<std::streamsize>(frame_bytes))) {
    av_frame_make_writable(e.yuv);
    const uint8_t* src[1] = {rgb.data()};
    int src_stride[1] = {width * 3};
    sws_scale(sws, src, src_stride, 0, height, e.yuv->data, e.yuv->linesize);
    e.yuv->pts = e.next_pts++;
    encoder_push(e, e.yuv, pkt);
    frames++;
  }
  if (frames == 0) die("raw input holds no complete frame");
  encoder_finish(e, pkt);
  av_packet_free(&pkt);
  sws_freeContext(sws);
  std::printf("frames=%lld\n", static_cast<long long>(frames));
  return 0;
}

// ---- transcode (decode -> re-encode) ----------------------------------------

int cmd_transcode(const std::string& input, const std::string& out_path, int crf,
                  int64_t bitrate_bps) {
  InputVideo in;
  open_input(in, input, true);
  const AVRational fps = in.stream()->avg_frame_rate.num > 0 ? in.stream()->avg_frame_rate
                                                             : AVRational{24, 1};
  Encoder e;
  SwsContext* sws = nullptr;
  AVPacket* rpkt = av_packet_alloc();
  AVPacket* wpkt = av_packet_alloc();
  AVFrame* frame = av_frame_alloc();
  int64_t frames = 0;

  auto push_decoded = [&](AVFrame* f) {
    if (!e.fmt) {
      open_encoder(e, out_path, f->width, f->height, fps, crf, bitrate_bps);
      sws = sws_getContext(f->width, f->height, static_cast<AVPixelFormat>(f->format),
                           f->width, f->height, AV_PIX_FMT_YUV420P,
                           SWS_BILINEAR, nullptr, nullptr, nullptr);
    }
    av_frame_make_writable(e.yuv);
    sws_scale(sws, f->data, f->linesize, 0, f->height, e.yuv->data, e.yuv->linesize);
    e.yuv->pts = e.next_pts++;
    encoder_push(e, e.yuv, wpkt);
    frames++;
  };

  auto receive_all = [&]() {
    while (avcodec_receive_frame(in.dec, frame) == 0) push_decoded(frame);
  };

  while (av_read_frame(in.fmt, rpkt) >= 0) {
    if (rpkt->stream_index == in.stream_index) {
      if (avcodec_send_packet(in.dec, rpkt) == 0) receive_all();
    }
    av_packet_unref(rpkt);
  }
  avcodec_send_packet(in.dec, nullptr);
  receive_all();
  if (frames == 0) die("no frames decoded from '" + input + "'");
  encoder_finish(e, wpkt);

  if (sws) sws_freeContext(sws);
  av_frame_free(&frame);
  av_packet_free(&rpkt);
  av_packet_free(&wpkt);
  std::printf("frames=%lld\n", static_cast<long long>(frames));
  return 0;
}

// ---- extract (mp4 -> annex-b elementary stream) -----------------------------

int cmd_extract(const std::string& input, const std::string& out_path) {
  InputVideo in;
  open_input(in, input, false);
  if (in.stream()->codecpar->codec_id != AV_CODEC_ID_HEVC)
    die("extract expects an H.265 stream");

  const AVBitStreamFilter* bsf = av_bsf_get_by_name("hevc_mp4toannexb");
  if (!bsf) die("hevc_mp4toannexb bitstream filter unavailable");
  AVBSFContext* ctx = nullptr;
  av_bsf_alloc(bsf, &ctx);
  avcodec_parameters_copy(ctx->par_in, in.stream()->codecpar);
  ctx->time_base_in = in.stream()->time_base;
  if (av_bsf_init(ctx) < 0) die("cannot init bitstream filter");

  std::ofstream os(out_path, std::ios::binary | std::ios::trunc);
  if (!os) die("cannot open output '" + out_path + "'");

  AVPacket* pkt = av_packet_alloc();
  int64_t packets = 0;
  while (av_read_frame(in.fmt, pkt) >= 0) {
    if (pkt->stream_index != in.stream_index) {
      av_packet_unref(pkt);
      continue;
    }
    if (av_bsf_send_packet(ctx, pkt) == 0) {
      while (av_bsf_receive_packet(ctx, pkt) == 0) {
        os.write(reinterpret_cast<const char*>(pkt->data), pkt->size);
        packets++;
        av_packet_unref(pkt);
      }
    }
    av_packet_unref(pkt);
  }
  av_bsf_free(&ctx);
  av_packet_free(&pkt);
  if (packets == 0) die("no packets extracted");
  std::printf("packets=%lld\n", static_cast<long long>(packets));
  return 0;
}

// ---- mux (annex-b elementary stream -> mp4, codec copy) ---------------------

int cmd_mux(const std::string& input, const std::string& out_path, const std::string& fps_str) {
  AVRational fps{24, 1};
  std::sscanf(fps_str.c_str(), "%d/%d", &fps.num, &fps.den) == 2 ||
      std::sscanf(fps_str.c_str(), "%d", &fps.num);
  if (fps.den <= 0) fps.den = 1;

  AVInputFormat* raw_fmt = av_find_input_format("hevc");
  if (!raw_fmt) die("raw hevc demuxer unavailable");
  AVDictionary* opts = nullptr;
  av_dict_set(&opts, "framerate", (std::to_string(fps.num) + "/" + std::to_string(fps.den)).c_str(), 0);
  AVFormatContext* ifmt = nullptr;
  int rc = avformat_open_input(&ifmt, input.c_str(), raw_fmt, &opts);
  av_dict_free(&opts);
  if (rc < 0) die("cannot open elementary stream: " + av_err(rc));
  if (avformat_find_stream_info(ifmt, nullptr) < 0) die("cannot parse elementary stream");
  AVStream* ist = ifmt->streams[0];

  // the mp4 muxer needs hvcC extradata, which a raw annex-b stream lacks;
  // pull it out of the first packets with the extract_extradata filter
  const AVBitStreamFilter* bsf = av_bsf_get_by_name("extract_extradata");
  if (!bsf) die("extract_extradata bitstream filter unavailable");
  AVBSFContext* bctx = nullptr;
  av_bsf_alloc(bsf, &bctx);
  avcodec_parameters_copy(bctx->par_in, ist->codecpar);
  if (av_bsf_init(bctx) < 0) die("cannot init extract_extradata");

  AVFormatContext* ofmt = nullptr;
  rc = avformat_alloc_output_context2(&ofmt, nullptr, "mp4", out_path.c_str());
  if (rc < 0) die("cannot create mp4 muxer: " + av_err(rc));
  ofmt->flags |= AVFMT_FLAG_BITEXACT;
  AVStream* ost = avformat_new_stream(ofmt, nullptr);
  avcodec_parameters_copy(ost->codecpar, ist->codecpar);
  ost->time_base = av_inv_q(fps);

  AVPacket* pkt = av_packet_alloc();
  std::vector<AVPacket*> pending;
  bool have_extradata = false;
  while (av_read_frame(ifmt, pkt) >= 0) {
    if (av_bsf_send_packet(bctx, pkt) == 0) {
      while (av_bsf_receive_packet(bctx, pkt) == 0) {
        if (!have_extradata) {
          int side_size = 0;
          const uint8_t* side =
              av_packet_get_side_data(pkt, AV_PKT_DATA_NEW_EXTRADATA, &side_size);
          if (side && side_size > 0) {
            ost->codecpar->extradata = static_cast<uint8_t*>(
                av_mallocz(static_cast<size_t>(side_size) + AV_INPUT_BUFFER_PADDING_SIZE));
            std::memcpy(ost->codecpar->extradata, side, static_cast<size_t>(side_size));
            ost->codecpar->extradata_size = side_size;
            have_extradata = true;
          }
        }
        pending.push_back(av_packet_clone(pkt));
        av_packet_unref(pkt);
      }
    } else {
      av_packet_unref(pkt);
    }
  }
  if (pending.empty()) die("no packets parsed from elementary stream");
  if (!have_extradata) die("no parameter sets found in elementary stream");

  rc = avio_open(&ofmt->pb, out_path.c_str(), AVIO_FLAG_WRITE);
  if (rc < 0) die("cannot open output: " + av_err(rc));
  if (avformat_write_header(ofmt, nullptr) < 0) die("cannot write mp4 header");

  // encodes are B-frame free, so presentation order == decode order
  int64_t idx = 0;
  for (AVPacket* p : pending) {
    p->pts = idx;
    p->dts = idx;
    p->duration = 1;
    p->stream_index = ost->index;
    idx++;
    if (av_interleaved_write_frame(ofmt, p) < 0) die("mux: write frame failed");
    av_packet_free(&p);
  }
  if (av_write_trailer(ofmt) < 0) die("mux: write trailer failed");
  std::printf("packets=%lld\n", static_cast<long long>(idx));

  av_packet_free(&pkt);
  av_bsf_free(&bctx);
  avio_closep(&ofmt->pb);
  avformat_free_context(ofmt);
  avformat_close_input(&ifmt);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  av_log_set_callback(counting_log_cb);

  CLI::App app{"vtdcodec: H.265 probe/decode/encode helper for the vtd pipeline"};
  app.require_subcommand(1);

  std::string input, output, fps = "24";
  int width = 0, height = 0, crf = -1;
  int64_t bitrate = 0;
  bool conceal = true;

  auto* probe = app.add_subcommand("probe", "print stream properties as key=value lines");
  probe->add_option("input", input)->required();

  auto* decode = app.add_subcommand("decode", "decode to raw rgb24 frames");
  decode->add_option("input", input)->required();
  decode->add_option("--out", output)->required();
  decode->add_flag("--conceal,!--no-conceal", conceal,
                   "conceal bitstream errors instead of failing (default on)");

  auto* encode = app.add_subcommand("encode", "encode raw rgb24 frames to H.265 mp4");
  encode->add_option("--in", input)->required();
  encode->add_option("--out", output)->required();
  encode->add_option("--width", width)->required();
  encode->add_option("--height", height)->required();
  encode->add_option("--fps", fps);
  encode->add_option("--crf", crf);
  encode->add_option("--bitrate-bps", bitrate);

  auto* transcode = app.add_subcommand("transcode", "re-encode a video with H.265");
  transcode->add_option("input", input)->required();
  transcode->add_option("--out", output)->required();
  transcode->add_option("--crf", crf);
  transcode->add_option("--bitrate-bps", bitrate);

  auto* extract = app.add_subcommand("extract", "extract annex-b H.265 elementary stream");
  extract->add_option("input", input)->required();
  extract->add_option("--out", output)->required();

  auto* mux = app.add_subcommand("mux", "wrap an annex-b H.265 stream into mp4 (codec copy)");
  mux->add_option("input", input)->required();
  mux->add_option("--out", output)->required();
  mux->add_option("--fps", fps);

  CLI11_PARSE(app, argc, argv);

  if (probe->parsed()) return cmd_probe(input);
  if (decode->parsed()) return cmd_decode(input, output, conceal);
  if (encode->parsed()) {
    if (crf < 0 && bitrate <= 0) die("encode needs --crf or --bitrate-bps");
    return cmd_encode(input, output, width, height, fps, crf, bitrate);
  }
  if (transcode->parsed()) {
    if (crf < 0 && bitrate <= 0) die("transcode needs --crf or --bitrate-bps");
    return cmd_transcode(input, output, crf, bitrate);
  }
  if (extract->parsed()) return cmd_extract(input, output);
  if (mux->parsed()) return cmd_mux(input, output, fps);
  return 2;
}
