/** Standalone HTML export embedding the fetched figure JSON verbatim. */

const PLOTLY_CDN = "https://cdn.plot.ly/plotly-2.29.1.min.js";

export function exportHtml(figureRaw: string, title = "3D urban energy model"): string {
  return `<!doctype html>
<html>
<head>
  <meta charset="utf-8">
  <title>${escapeHtml(title)}</title>
  <script src="${PLOTLY_CDN}"></script>
  <style>body{margin:0} #plot{width:100vw;height:100vh;}</style>
</head>
<body>
  <div id="plot"></div>
  <script>
    var fig = ${figureRaw};
    Plotly.newPlot("plot", fig.data, fig.layout || {});
  </script>
</body>
</html>
`;
}

/** The figure JSON embedded in an exported page, byte-for-byte. */
export function extractEmbeddedJson(html: string): string | null {
  const match = html.match(/var fig = ([\s\S]*?);\n    Plotly\.newPlot/);
  return match ? match[1] : null;
}

function escapeHtml(s: string): string {
  return s
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}
