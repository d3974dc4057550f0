// Placeholder for the browser engine bundle. The page served by /app embeds
// the bootstrap message in <script id="spiar-bootstrap">; a real engine
// reads it, renders the model and exchanges deltas with POST /app/delta.
(function () {
  var boot = document.getElementById("spiar-bootstrap");
  var root = document.getElementById("spiar-root");
  if (boot && root) {
    root.textContent = "Browser engine not installed. Bootstrap: " + boot.textContent.length + " bytes.";
  }
})();
