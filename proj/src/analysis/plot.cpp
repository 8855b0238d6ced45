#include "cb/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>
#include <sstream>

#include "json.hpp"

namespace cb::plot {

namespace {

constexpr double kWidth = 800.0;
constexpr double kHeight = 520.0;
constexpr double kMarginLeft = 70.0;
constexpr double kMarginRight = 20.0;
constexpr double kMarginTop = 40.0;
constexpr double kMarginBottom = 50.0;

const char* const kPalette[] = {"#1f77b4", "#2ca02c", "#ff7f0e", "#d62728", "#9467bd",
                                "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

std::string escape_xml(const std::string& s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&#39;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

struct LogAxes {
  double x_lo, x_hi, y_lo, y_hi;  // decades (log10)

  double px(double x) const {
    return kMarginLeft + (std::log10(x) - x_lo) / (x_hi - x_lo) * (kWidth - kMarginLeft - kMarginRight);
  }
  double py(double y) const {
    return kHeight - kMarginBottom -
           (std::log10(y) - y_lo) / (y_hi - y_lo) * (kHeight - kMarginTop - kMarginBottom);
  }
};

LogAxes fit_axes(const RooflineData& data) {
  std::vector<double> xs;
  std::vector<double> ys;
  for (const auto& h : data.hosts) {
    ys.push_back(h.peak_flops_gflops);
    for (const auto& [kind, bw] : h.bandwidths_gbps) xs.push_back(h.peak_flops_gflops / bw);
  }
  for (const auto& p : data.points) {
    if (p.point.operational_intensity > 0) xs.push_back(p.point.operational_intensity);
    if (p.point.achieved_gflops > 0) ys.push_back(p.point.achieved_gflops);
  }
  if (xs.empty()) xs = {0.1, 10.0};
  if (ys.empty()) ys = {1.0, 100.0};
  const auto [xmin, xmax] = std::minmax_element(xs.begin(), xs.end());
  const auto [ymin, ymax] = std::minmax_element(ys.begin(), ys.end());
  return {std::floor(std::log10(*xmin)) - 1, std::ceil(std::log10(*xmax)) + 1,
          std::floor(std::log10(*ymin)) - 1, std::ceil(std::log10(*ymax)) + 1};
}

std::map<std::string, std::string> series_colors(const RooflineData& data) {
  std::set<std::string> names;
  for (const auto& p : data.points) names.insert(p.series);
  std::map<std::string, std::string> colors;
  std::size_t i = 0;
  for (const auto& n : names) colors[n] = kPalette[i++ % std::size(kPalette)];
  return colors;
}

nlohmann::json roofline_json(const RooflineData& data) {
  nlohmann::json hosts = nlohmann::json::array();
  for (const auto& h : data.hosts) {
    nlohmann::json knees = nlohmann::json::object();
    for (const auto& [kind, bw] : h.bandwidths_gbps) knees[kind] = h.peak_flops_gflops / bw;
    hosts.push_back({{"hostname", h.hostname},
                     {"peak_gflops", h.peak_flops_gflops},
                     {"bandwidths_gbps", h.bandwidths_gbps},
                     {"knees", knees}});
  }
  nlohmann::json points = nlohmann::json::array();
  const auto colors = series_colors(data);
  for (const auto& p : data.points) {
    points.push_back({{"label", p.point.label},
                      {"host", p.host},
                      {"series", p.series},
                      {"color", colors.at(p.series)},
                      {"operational_intensity", p.point.operational_intensity},
                      {"achieved_gflops", p.point.achieved_gflops}});
  }
  return {{"title", data.title}, {"hosts", hosts}, {"points", points}};
}

}  // namespace

std::string roofline_svg(const RooflineData& data) {
  const LogAxes ax = fit_axes(data);
  const double x0 = std::pow(10.0, ax.x_lo);
  const double x1 = std::pow(10.0, ax.x_hi);
  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
      << "\" viewBox=\"0 0 " << kWidth << ' ' << kHeight << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg << "<text x=\"" << kWidth / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">"
      << escape_xml(data.title) << "</text>\n";

  for (int d = static_cast<int>(ax.x_lo); d <= static_cast<int>(ax.x_hi); ++d) {
    const double x = ax.px(std::pow(10.0, d));
    svg << "<line x1=\"" << num(x) << "\" y1=\"" << kMarginTop << "\" x2=\"" << num(x) << "\" y2=\""
        << kHeight - kMarginBottom << "\" stroke=\"#ddd\"/>"
        << "<text x=\"" << num(x) << "\" y=\"" << kHeight - kMarginBottom + 16
        << "\" text-anchor=\"middle\">1e" << d << "</text>\n";
  }
  for (int d = static_cast<int>(ax.y_lo); d <= static_cast<int>(ax.y_hi); ++d) {
    const double y = ax.py(std::pow(10.0, d));
    svg << "<line x1=\"" << kMarginLeft << "\" y1=\"" << num(y) << "\" x2=\"" << kWidth - kMarginRight
        << "\" y2=\"" << num(y) << "\" stroke=\"#ddd\"/>"
        << "<text x=\"" << kMarginLeft - 6 << "\" y=\"" << num(y + 4)
        << "\" text-anchor=\"end\">1e" << d << "</text>\n";
  }
  svg << "<text x=\"" << kWidth / 2 << "\" y=\"" << kHeight - 10
      << "\" text-anchor=\"middle\">Operational intensity [FLOP/Byte]</text>\n";
  svg << "<text transform=\"translate(16," << kHeight / 2
      << ") rotate(-90)\" text-anchor=\"middle\">Performance [GFLOP/s]</text>\n";

  std::size_t host_index = 0;
  for (const auto& h : data.hosts) {
    const char* color = kPalette[(host_index++ + 3) % std::size(kPalette)];
    for (const auto& [kind, bw] : h.bandwidths_gbps) {
      const double knee = h.peak_flops_gflops / bw;
      const double ylo = std::max(x0 * bw, std::pow(10.0, ax.y_lo));
      const double xlo = ylo / bw;
      svg << "<polyline class=\"ceiling\" data-host=\"" << escape_xml(h.hostname) << "\" data-kind=\""
          << escape_xml(kind) << "\" fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\""
          << num(ax.px(xlo)) << ',' << num(ax.py(ylo)) << ' ' << num(ax.px(knee)) << ','
          << num(ax.py(h.peak_flops_gflops)) << "\"/>"
          << "<text x=\"" << num(ax.px(knee) - 4) << "\" y=\"" << num(ax.py(h.peak_flops_gflops) + 14)
          << "\" text-anchor=\"end\" fill=\"" << color << "\">" << escape_xml(h.hostname) << ' '
          << escape_xml(kind) << ' ' << num(bw) << " GB/s</text>\n";
    }
    double knee_min = x1;
    for (const auto& [kind, bw] : h.bandwidths_gbps) knee_min = std::min(knee_min, h.peak_flops_gflops / bw);
    svg << "<line class=\"ceiling\" data-host=\"" << escape_xml(h.hostname)
        << "\" data-kind=\"peak\" x1=\"" << num(ax.px(knee_min)) << "\" y1=\""
        << num(ax.py(h.peak_flops_gflops)) << "\" x2=\"" << num(ax.px(x1)) << "\" y2=\""
        << num(ax.py(h.peak_flops_gflops)) << "\" stroke=\"" << color << "\" stroke-width=\"1.5\"/>"
        << "<text x=\"" << num(ax.px(x1) - 4) << "\" y=\"" << num(ax.py(h.peak_flops_gflops) - 5)
        << "\" text-anchor=\"end\" fill=\"" << color << "\">" << escape_xml(h.hostname) << " peak "
        << num(h.peak_flops_gflops) << " GFLOP/s</text>\n";
  }

  const auto colors = series_colors(data);
  for (const auto& p : data.points) {
    if (p.point.operational_intensity <= 0 || p.point.achieved_gflops <= 0) continue;
    svg << "<circle class=\"point\" cx=\"" << num(ax.px(p.point.operational_intensity)) << "\" cy=\""
        << num(ax.py(p.point.achieved_gflops)) << "\" r=\"5\" fill=\"" << colors.at(p.series)
        << "\"><title>" << escape_xml(p.point.label) << " (" << escape_xml(p.host) << "): "
        << p.point.operational_intensity << " FLOP/B, " << p.point.achieved_gflops
        << " GFLOP/s</title></circle>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

std::string roofline_html(const RooflineData& data) {
  // The script rebuilds the plot from the embedded JSON on every view change;
  // "</" is escaped so the payload cannot close the script element.
  std::string payload = roofline_json(data).dump();
  for (std::size_t pos = 0; (pos = payload.find("</", pos)) != std::string::npos; pos += 3)
    payload.replace(pos, 2, "<\\/");

  std::ostringstream html;
  html << "<!DOCTYPE html>\n<html><head><meta charset=\"utf-8\"><title>" << escape_xml(data.title)
       << "</title>\n<style>body{font-family:sans-serif;margin:16px}#plot{border:1px solid #ccc;"
          "cursor:grab}#tip{position:absolute;background:#fff;border:1px solid #888;padding:4px;"
          "font-size:12px;display:none;pointer-events:none}#legend span{margin-right:12px}</style>"
          "</head><body>\n";
  html << "<h2>" << escape_xml(data.title) << "</h2>\n";
  html << "<div id=\"legend\"></div>\n<svg id=\"plot\" width=\"" << kWidth << "\" height=\"" << kHeight
       << "\"></svg><div id=\"tip\"></div>\n";
  html << "<p>Mouse wheel zooms, drag pans, double click resets.</p>\n";
  html << "<noscript>\n" << roofline_svg(data) << "</noscript>\n";
  html << "<script type=\"application/json\" id=\"data\">" << payload << "</script>\n";
  html << R"JS(<script>
(function(){
const D=JSON.parse(document.getElementById('data').textContent);
const W=)JS" << kWidth << ",H=" << kHeight << ",ML=" << kMarginLeft << ",MR=" << kMarginRight
       << ",MT=" << kMarginTop << ",MB=" << kMarginBottom << R"JS(;
const svg=document.getElementById('plot'),tip=document.getElementById('tip');
const NS='http://www.w3.org/2000/svg',L=Math.log10;
let xs=[],ys=[];
D.hosts.forEach(h=>{ys.push(h.peak_gflops);Object.values(h.knees).forEach(k=>xs.push(k));});
D.points.forEach(p=>{if(p.operational_intensity>0)xs.push(p.operational_intensity);if(p.achieved_gflops>0)ys.push(p.achieved_gflops);});
if(!xs.length)xs=[0.1,10];if(!ys.length)ys=[1,100];
const home={x0:Math.floor(L(Math.min(...xs)))-1,x1:Math.ceil(L(Math.max(...xs)))+1,y0:Math.floor(L(Math.min(...ys)))-1,y1:Math.ceil(L(Math.max(...ys)))+1};
let v=Object.assign({},home);
const hidden=new Set();
const px=x=>ML+(L(x)-v.x0)/(v.x1-v.x0)*(W-ML-MR),py=y=>H-MB-(L(y)-v.y0)/(v.y1-v.y0)*(H-MT-MB);
function el(n,a,t){const e=document.createElementNS(NS,n);for(const k in a)e.setAttribute(k,a[k]);if(t)e.textContent=t;svg.appendChild(e);return e;}
const pal=['#d62728','#9467bd','#8c564b','#e377c2','#7f7f7f','#bcbd22','#17becf','#1f77b4','#2ca02c','#ff7f0e'];
function draw(){
 svg.innerHTML='';
 el('rect',{width:W,height:H,fill:'white'});
 for(let d=Math.floor(v.x0);d<=Math.ceil(v.x1);d++){const x=px(Math.pow(10,d));if(x<ML||x>W-MR)continue;el('line',{x1:x,y1:MT,x2:x,y2:H-MB,stroke:'#ddd'});el('text',{x:x,y:H-MB+16,'text-anchor':'middle','font-size':11},'1e'+d);}
 for(let d=Math.floor(v.y0);d<=Math.ceil(v.y1);d++){const y=py(Math.pow(10,d));if(y<MT||y>H-MB)continue;el('line',{x1:ML,y1:y,x2:W-MR,y2:y,stroke:'#ddd'});el('text',{x:ML-6,y:y+4,'text-anchor':'end','font-size':11},'1e'+d);}
 el('text',{x:W/2,y:H-10,'text-anchor':'middle','font-size':12},'Operational intensity [FLOP/Byte]');
 el('text',{transform:'translate(16,'+H/2+') rotate(-90)','text-anchor':'middle','font-size':12},'Performance [GFLOP/s]');
 const xa=Math.pow(10,v.x0),xb=Math.pow(10,v.x1);
 D.hosts.forEach((h,hi)=>{const c=pal[hi%pal.length];
  Object.entries(h.bandwidths_gbps).forEach(([k,bw])=>{const knee=h.knees[k];el('polyline',{fill:'none',stroke:c,'stroke-width':1.5,'class':'ceiling','data-host':h.hostname,'data-kind':k,points:px(xa)+','+py(xa*bw)+' '+px(knee)+','+py(h.peak_gflops)});
   el('text',{x:px(knee)-4,y:py(h.peak_gflops)+14,'text-anchor':'end',fill:c,'font-size':11},h.hostname+' '+k+' '+bw+' GB/s');});
  const km=Math.min(...Object.values(h.knees));
  el('line',{x1:px(km),y1:py(h.peak_gflops),x2:px(xb),y2:py(h.peak_gflops),stroke:c,'stroke-width':1.5,'class':'ceiling','data-host':h.hostname,'data-kind':'peak'});
  el('text',{x:W-MR-4,y:py(h.peak_gflops)-5,'text-anchor':'end',fill:c,'font-size':11},h.hostname+' peak '+h.peak_gflops+' GFLOP/s');});
 D.points.forEach(p=>{if(hidden.has(p.series)||p.operational_intensity<=0||p.achieved_gflops<=0)return;
  const c=el('circle',{cx:px(p.operational_intensity),cy:py(p.achieved_gflops),r:5,fill:p.color,'class':'point'});
  c.addEventListener('mousemove',e=>{tip.style.display='block';tip.style.left=(e.pageX+10)+'px';tip.style.top=(e.pageY+10)+'px';
   tip.textContent=p.label+' ('+p.host+'): '+p.operational_intensity.toPrecision(4)+' FLOP/B, '+p.achieved_gflops.toPrecision(4)+' GFLOP/s';});
  c.addEventListener('mouseleave',()=>{tip.style.display='none';});});
 el('text',{x:W/2,y:22,'text-anchor':'middle','font-size':15},D.title);
}
const leg=document.getElementById('legend'),seen={};
D.points.forEach(p=>{if(seen[p.series])return;seen[p.series]=1;const s=document.createElement('span');
 s.innerHTML='<span style="color:'+p.color+'">&#9679;</span> ';s.appendChild(document.createTextNode(p.series||'(all)'));s.style.cursor='pointer';
 s.onclick=()=>{hidden.has(p.series)?hidden.delete(p.series):hidden.add(p.series);s.style.opacity=hidden.has(p.series)?0.4:1;draw();};leg.appendChild(s);});
svg.addEventListener('wheel',e=>{e.preventDefault();const r=svg.getBoundingClientRect();
 const fx=(e.clientX-r.left-ML)/(W-ML-MR),fy=1-(e.clientY-r.top-MT)/(H-MT-MB),z=e.deltaY>0?1.15:1/1.15;
 const cx=v.x0+fx*(v.x1-v.x0),cy=v.y0+fy*(v.y1-v.y0);
 v={x0:cx-(cx-v.x0)*z,x1:cx+(v.x1-cx)*z,y0:cy-(cy-v.y0)*z,y1:cy+(v.y1-cy)*z};draw();},{passive:false});
let drag=null;
svg.addEventListener('mousedown',e=>{drag={x:e.clientX,y:e.clientY,v:Object.assign({},v)};});
window.addEventListener('mouseup',()=>{drag=null;});
window.addEventListener('mousemove',e=>{if(!drag)return;const dx=(e.clientX-drag.x)/(W-ML-MR)*(drag.v.x1-drag.v.x0),dy=(e.clientY-drag.y)/(H-MT-MB)*(drag.v.y1-drag.v.y0);
 v={x0:drag.v.x0-dx,x1:drag.v.x1-dx,y0:drag.v.y0+dy,y1:drag.v.y1+dy};draw();});
svg.addEventListener('dblclick',()=>{v=Object.assign({},home);draw();});
draw();
})();
</script>
</body></html>
)JS";
  return html.str();
}

std::string timeshare_html(const std::string& title, const std::vector<TimeShareBar>& bars) {
  static const std::map<analysis::Category, const char*> colors = {
      {analysis::Category::computation, "#2ca02c"},
      {analysis::Category::synchronization, "#1f77b4"},
      {analysis::Category::communication, "#d62728"}};
  constexpr double bar_w = 600.0;
  constexpr double label_w = 160.0;
  constexpr double row_h = 34.0;
  const double height = 60.0 + row_h * static_cast<double>(bars.size());

  std::ostringstream html;
  html << "<!DOCTYPE html>\n<html><head><meta charset=\"utf-8\"><title>" << escape_xml(title)
       << "</title></head><body style=\"font-family:sans-serif\">\n<h2>" << escape_xml(title) << "</h2>\n";
  html << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << label_w + bar_w + 20 << "\" height=\""
       << height << "\" font-size=\"12\">\n";
  double y = 10.0;
  for (const auto& bar : bars) {
    html << "<text x=\"" << label_w - 8 << "\" y=\"" << num(y + 18) << "\" text-anchor=\"end\">"
         << escape_xml(bar.label) << "</text>\n";
    double x = label_w;
    for (const auto& s : bar.shares) {
      const double w = s.fraction * bar_w;
      html << "<rect class=\"share\" data-category=\"" << analysis::to_string(s.category) << "\" x=\""
           << num(x) << "\" y=\"" << num(y) << "\" width=\"" << num(w) << "\" height=\"" << row_h - 8
           << "\" fill=\"" << colors.at(s.category) << "\"><title>" << analysis::to_string(s.category)
           << ": " << num(100.0 * s.fraction) << "%</title></rect>\n";
      if (w > 40)
        html << "<text x=\"" << num(x + w / 2) << "\" y=\"" << num(y + 18)
             << "\" text-anchor=\"middle\" fill=\"white\">" << num(100.0 * s.fraction) << "%</text>\n";
      x += w;
    }
    y += row_h;
  }
  double lx = label_w;
  for (analysis::Category c : analysis::kCategories) {
    html << "<rect x=\"" << lx << "\" y=\"" << num(y + 6) << "\" width=\"12\" height=\"12\" fill=\""
         << colors.at(c) << "\"/><text x=\"" << lx + 16 << "\" y=\"" << num(y + 16) << "\">"
         << analysis::to_string(c) << "</text>\n";
    lx += 140;
  }
  html << "</svg>\n</body></html>\n";
  return html.str();
}

}  // namespace cb::plot
